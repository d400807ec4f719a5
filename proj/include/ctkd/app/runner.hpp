// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "ctkd/app/config.hpp"
#include "ctkd/data/dataset.hpp"
#include "ctkd/models/checkpoint.hpp"
#include "ctkd/trainer/trainer.hpp"

namespace ctkd::app {

/// Builds the train/test pair selected by the dataset section. Blobs are
/// standardized with statistics fitted on the training split.
data::DatasetPair load_dataset(const ExperimentConfig& cfg);

/// Class count shared by both splits.
std::size_t class_count(const data::DatasetPair& data);

/// Student checkpoint: the model plus, for learned runs, the temperature
/// module under meta["temperature"] and tensors "temperature.<i>".
models::Checkpoint pack_student(const trainer::DistillResult& result);
std::optional<distill::TemperatureModule> unpack_temperature(const models::Checkpoint& ckpt);

// Each command writes into cfg.output_dir, creating it if needed, and logs
// progress lines to `log`. Failures surface as ConfigError, ValidationError,
// FormatError or RunError.

/// dataset.bin plus train.csv and test.csv.
void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);

/// Cross-entropy training of the teacher. Writes the teacher checkpoint,
/// metrics.csv, config.json and summary.json.
void cmd_train_teacher(const ExperimentConfig& cfg, std::ostream& log);

/// Cross-entropy-only student (the no-distillation baseline). Same outputs
/// as distill.
void cmd_train_student(const ExperimentConfig& cfg, std::ostream& log);

/// Distills the configured teacher checkpoint into the student. Writes
/// student.ckpt, metrics.csv, config.json and summary.json. A non-finite
/// loss leaves the last good checkpoint and diagnostics.json behind.
void cmd_distill(const ExperimentConfig& cfg, std::ostream& log);

/// Test accuracy of a student or teacher checkpoint. Prints the value in
/// the same form the metrics CSV uses and returns it.
double cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                std::ostream& out);

/// Fixed-tau grid plus one learned-temperature row. Writes sweep.csv
/// (tau,mean,seed_<s>...) and prints the table.
std::vector<trainer::GridRow> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);

void write_sweep_csv(const std::filesystem::path& path, std::span<const trainer::GridRow> rows,
                     std::span<const std::uint64_t> seeds);

}  // namespace ctkd::app
