// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctkd/curriculum/schedule.hpp"
#include "ctkd/data/augment.hpp"
#include "ctkd/data/dataset.hpp"
#include "ctkd/distill/temperature.hpp"
#include "ctkd/errors.hpp"
#include "ctkd/models/model.hpp"
#include "ctkd/trainer/metrics.hpp"
#include "ctkd/trainer/optimizer.hpp"

namespace ctkd::trainer {

struct TrainSettings {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  SgdSettings optimizer;
  std::uint64_t seed = 0;
  data::AugmentSpec augment;
  /// When false the seconds column is written as 0 so metrics stay
  /// byte-identical across repeated runs.
  bool record_wall_clock = false;

  void validate() const;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

struct SupervisedResult {
  models::Model model;
  std::vector<MetricsRecord> metrics;
};

/// Cross-entropy-only training (teacher pre-training and the no-KD student
/// baseline). tau fields are logged as 1 and lambda as 0.
SupervisedResult train_supervised(const models::ModelSpec& spec, const data::DatasetPair& data,
                                  const TrainSettings& settings, const EpochCallback& on_epoch = {});

struct DistillConfig {
  models::ModelSpec student;
  /// Exactly one of these drives tau.
  std::optional<distill::TemperatureSpec> temperature;
  std::optional<double> fixed_tau;
  curriculum::CurriculumSchedule curriculum;
  double alpha_ce = 0.1;
  double alpha_kd = 0.9;
  TrainSettings train;

  void validate() const;
  /// Copy with the run seed replaced and the student / temperature init
  /// seeds derived from it.
  DistillConfig with_seed(std::uint64_t seed) const;
};

struct DistillResult {
  models::Model student;
  std::optional<distill::TemperatureModule> temperature;
  std::vector<MetricsRecord> metrics;
};

/// Raised when a batch produces a non-finite loss. `partial` holds the state
/// before the offending update (the last good parameters) and the metrics of
/// every completed epoch.
class NonFiniteLoss : public RunError {
public:
  NonFiniteLoss(std::string what, std::size_t epoch, std::size_t batch,
                std::shared_ptr<DistillResult> partial)
      : RunError(std::move(what)), epoch(epoch), batch(batch), partial(std::move(partial)) {}
  std::size_t epoch;
  std::size_t batch;
  std::shared_ptr<DistillResult> partial;
};

/// Distills `teacher` into a fresh student.
///
/// Per batch: teacher logits (detached), student logits, tau from the
/// temperature module routed through a gradient reversal gate carrying the
/// epoch's lambda (or the fixed override), loss = alpha_ce*CE + alpha_kd*KD,
/// one backward pass and one SGD step over student and temperature
/// parameters together. Temperature parameters get no weight decay.
DistillResult distill(const models::Model& teacher, const data::DatasetPair& data,
                      const DistillConfig& config, const EpochCallback& on_epoch = {});

/// Fraction of argmax-correct predictions.
double evaluate(const models::Model& model, const data::Dataset& dataset);

struct GridRow {
  /// Fixed temperature, or empty for the learned-temperature row.
  std::optional<double> tau;
  std::vector<double> accuracies;  // one per seed, final test accuracy
  double mean = 0.0;

  std::string label() const;
};

/// Fixed-temperature distillation for every tau and seed, followed by one
/// learned-temperature row built from `base` (Global-T when base has no
/// temperature module).
std::vector<GridRow> grid_search_tau(const models::Model& teacher, const data::DatasetPair& data,
                                     const DistillConfig& base, std::span<const double> taus,
                                     std::span<const std::uint64_t> seeds, bool include_learned = true);

}  // namespace ctkd::trainer
