// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctkd/curriculum/schedule.hpp"
#include "ctkd/data/augment.hpp"
#include "ctkd/trainer/optimizer.hpp"
#include "ctkd/trainer/trainer.hpp"

namespace ctkd::app {

struct DatasetConfig {
  std::string kind = "blobs";  // blobs | idx | cache
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  double spread = 0.7;
  std::size_t modes_per_class = 2;
  std::uint64_t seed = 7;
  std::string train_images, train_labels, test_images, test_labels;
  std::string cache;
  data::AugmentSpec augment;
};

struct NetConfig {
  std::string arch;
  std::vector<std::size_t> hidden;
};

struct TeacherConfig {
  NetConfig net{"mlp", {64}};
  std::size_t epochs = 30;
  /// Empty means <output_dir>/teacher.ckpt.
  std::string checkpoint;
};

struct TemperatureConfig {
  std::string mode = "global";  // global | instance | fixed
  double tau_init = 1.0;
  double tau_range = 20.0;
  double global_init = 0.0;
  std::size_t inter_channels = 256;
  double fixed_tau = 4.0;
};

struct CurriculumConfig {
  std::string strategy = "cosine";
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  std::size_t e_loops = 10;
  double fixed_lambda = 1.0;
  double delay_tau = 1.0;
};

struct SweepConfig {
  std::vector<double> taus{1, 2, 3, 4, 5, 6, 8};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool include_learned = true;
};

/// Everything a run needs. Parsed from a JSON document whose every key is
/// optional; omitted keys take the defaults above.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  DatasetConfig dataset;
  TeacherConfig teacher;
  NetConfig student{"linear", {}};
  TemperatureConfig temperature;
  CurriculumConfig curriculum;
  double alpha_ce = 0.1;
  double alpha_kd = 0.9;
  trainer::SgdSettings optimizer;
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  bool record_wall_clock = false;
  SweepConfig sweep;

  std::filesystem::path teacher_checkpoint() const;
  /// Input width and class count implied by the dataset section. For idx
  /// datasets these are known only after loading.
  std::size_t input_dim() const;

  trainer::TrainSettings train_settings(std::size_t epochs) const;
  models::ModelSpec teacher_spec(std::size_t input_dim, std::size_t classes) const;
  models::ModelSpec student_spec(std::size_t input_dim, std::size_t classes) const;
  curriculum::CurriculumSchedule schedule() const;
  /// Student, temperature and schedule for the configured run seed.
  trainer::DistillConfig distill_config(std::size_t input_dim, std::size_t classes) const;
};

/// Parses and validates. Throws ConfigError listing every violation: unknown
/// keys, wrong types and out-of-range values.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved document (all defaults filled in).
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Semantic checks only; returns the violations.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  /// Switches the run to a fixed temperature.
  std::optional<double> tau_fixed;
  std::optional<std::string> strategy;
};

/// Applies the overrides and revalidates; throws ConfigError.
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

/// FNV-1a 64 of the resolved document, hex encoded.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ctkd::app
