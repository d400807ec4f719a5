// SPDX-License-Identifier: Apache-2.0
#include "ctkd/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/distill/losses.hpp"
#include "ctkd/rng.hpp"
#ifndef CTKD_VANILLA_ONLY
#include "ctkd/distill/grl.hpp"
#endif

namespace ctkd::trainer {

void TrainSettings::validate() const {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  optimizer.validate();
  if (augment.enabled && !(augment.flip_prob >= 0.0 && augment.flip_prob <= 1.0)) {
    throw ValidationError("augment flip_prob must be in [0, 1]");
  }
}

void DistillConfig::validate() const {
  student.validate();
  if (temperature.has_value() == fixed_tau.has_value()) {
    throw ValidationError("exactly one of a temperature module or a fixed tau must drive tau");
  }
  if (temperature) {
    temperature->validate();
    if (temperature->kind == distill::TemperatureKind::instance &&
        temperature->classes != student.classes) {
      throw ValidationError("instance temperature class count differs from the student's");
    }
  }
  if (fixed_tau && !(*fixed_tau > 0.0)) throw ValidationError("fixed tau must be positive");
  curriculum.validate();
  if (!(alpha_ce >= 0.0) || !(alpha_kd >= 0.0)) throw ValidationError("loss weights must be >= 0");
  train.validate();
}

DistillConfig DistillConfig::with_seed(std::uint64_t seed) const {
  DistillConfig c = *this;
  c.train.seed = seed;
  c.student.seed = mix_seed(seed, streams::student_init);
  if (c.temperature) c.temperature->seed = mix_seed(seed, streams::temperature_init);
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t count_correct(const ad::Tensor& logits, std::span<const int> labels) {
  const std::size_t cols = logits.cols();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (argmax_row(logits.values().subspan(r * cols, cols)) == static_cast<std::size_t>(labels[r])) {
      ++correct;
    }
  }
  return correct;
}

ad::Tensor batch_inputs(const data::Dataset& ds, std::span<const std::size_t> idx,
                        const TrainSettings& s, std::size_t epoch, std::size_t batch_index) {
  auto x = ds.gather(idx);
  if (!s.augment.enabled || !ds.is_image()) return x;
  auto aug = data::augment(x.values(), ds.image_side, s.augment.pad, s.augment.flip_prob,
                           data::augment_seed(s.seed, epoch, batch_index));
  return ad::Tensor::from(x.shape(), std::move(aug));
}

void check_data(const models::ModelSpec& spec, const data::DatasetPair& data) {
  data.train.validate();
  data.test.validate();
  if (data.train.dim != spec.input_dim || data.test.dim != spec.input_dim) {
    throw ValidationError(fmt::format("dataset width {} does not match model input {}",
                                      data.train.dim, spec.input_dim));
  }
  if (data.train.classes > spec.classes) {
    throw ValidationError(fmt::format("dataset has {} classes, model only {}", data.train.classes,
                                      spec.classes));
  }
  if (data.train.size() == 0) throw ValidationError("training split is empty");
}

struct EpochTotals {
  double ce = 0.0;
  double kd = 0.0;
  std::size_t correct = 0;
  std::size_t seen = 0;
  double tau_sum = 0.0;
  double tau_min = std::numeric_limits<double>::infinity();
  double tau_max = -std::numeric_limits<double>::infinity();

  void add_tau(const ad::Tensor& tau, std::size_t batch) {
    if (tau.numel() == 1) {
      tau_sum += tau.item() * static_cast<double>(batch);
      tau_min = std::min(tau_min, tau.item());
      tau_max = std::max(tau_max, tau.item());
      return;
    }
    for (double t : tau.values()) {
      tau_sum += t;
      tau_min = std::min(tau_min, t);
      tau_max = std::max(tau_max, t);
    }
  }

  MetricsRecord finish(std::size_t epoch, double test_acc, double lambda, double seconds) const {
    const auto n = static_cast<double>(seen);
    return {epoch, ce / n, kd / n, static_cast<double>(correct) / n, test_acc,
            tau_sum / n, tau_min, tau_max, lambda, seconds};
  }
};

}  // namespace

double evaluate(const models::Model& model, const data::Dataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  constexpr std::size_t kChunk = 1024;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    const std::size_t end = std::min(dataset.size(), start + kChunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto logits = model.forward(dataset.gather(idx));
    correct += count_correct(logits, dataset.gather_labels(idx));
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

SupervisedResult train_supervised(const models::ModelSpec& spec, const data::DatasetPair& data,
                                  const TrainSettings& settings, const EpochCallback& on_epoch) {
  settings.validate();
  check_data(spec, data);
  SupervisedResult result{models::Model::build(spec), {}};
  Sgd opt(settings.optimizer, settings.epochs);
  opt.add_group(result.model.parameters(), settings.optimizer.weight_decay);

  const auto start = Clock::now();
  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    opt.set_epoch(epoch);
    EpochTotals totals;
    const data::BatchPlan plan{settings.batch_size, settings.seed, epoch};
    const auto batches = plan.batches(data.train.size());
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const auto x = batch_inputs(data.train, idx, settings, epoch, b);
      const auto y = data.train.gather_labels(idx);
      const auto logits = result.model.forward(x);
      const auto loss = distill::cross_entropy(logits, y);
      if (!std::isfinite(loss.item())) {
        throw RunError(fmt::format("non-finite loss at epoch {} batch {}", epoch, b));
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      totals.ce += loss.item() * static_cast<double>(idx.size());
      totals.correct += count_correct(logits, y);
      totals.seen += idx.size();
      totals.add_tau(ad::Tensor::scalar(1.0), idx.size());
    }
    const double secs = settings.record_wall_clock
                            ? std::chrono::duration<double>(Clock::now() - start).count()
                            : 0.0;
    result.metrics.push_back(totals.finish(epoch, evaluate(result.model, data.test), 0.0, secs));
    if (on_epoch) on_epoch(result.metrics.back());
  }
  return result;
}

DistillResult distill(const models::Model& teacher, const data::DatasetPair& data,
                      const DistillConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_data(config.student, data);
  if (teacher.spec().classes != config.student.classes) {
    throw ValidationError(fmt::format("teacher predicts {} classes, student {}",
                                      teacher.spec().classes, config.student.classes));
  }
  if (teacher.spec().input_dim != config.student.input_dim) {
    throw ValidationError("teacher and student input widths differ");
  }

  auto state = std::make_shared<DistillResult>(
      DistillResult{models::Model::build(config.student), std::nullopt, {}});
  Sgd opt(config.train.optimizer, config.train.epochs);
  opt.add_group(state->student.parameters(), config.train.optimizer.weight_decay);

#ifdef CTKD_VANILLA_ONLY
  if (config.temperature) {
    throw ValidationError("this build supports fixed-temperature distillation only");
  }
#else
  if (config.temperature) {
    state->temperature = distill::TemperatureModule::build(*config.temperature);
    opt.add_group(state->temperature->parameters(), 0.0);
  }
  distill::GrlGate gate;
#endif

  const auto start = Clock::now();
  const auto& s = config.train;
  for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
    opt.set_epoch(epoch);
    const double lambda = config.curriculum.lambda_at(epoch);
#ifndef CTKD_VANILLA_ONLY
    gate.set_lambda(lambda);
#endif
    EpochTotals totals;
    const data::BatchPlan plan{s.batch_size, s.seed, epoch};
    const auto batches = plan.batches(data.train.size());
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const auto x = batch_inputs(data.train, idx, s, epoch, b);
      const auto y = data.train.gather_labels(idx);
      const auto teacher_logits = teacher.forward(x).detach();
      const auto student_logits = state->student.forward(x);

      ad::Tensor tau;
#ifdef CTKD_VANILLA_ONLY
      tau = ad::Tensor::scalar(*config.fixed_tau);
#else
      if (state->temperature && !config.curriculum.in_delay(epoch)) {
        tau = gate.apply(state->temperature->predict(teacher_logits, student_logits));
      } else {
        const double fixed = config.fixed_tau ? *config.fixed_tau : config.curriculum.delay_tau;
        tau = gate.apply(ad::Tensor::scalar(fixed));
      }
#endif
      const auto ce = distill::cross_entropy(student_logits, y);
      const auto kd = distill::kd_loss(teacher_logits, student_logits, tau);
      const auto loss = distill::total_loss(ce, kd, config.alpha_ce, config.alpha_kd);
      if (!std::isfinite(loss.item())) {
        throw NonFiniteLoss(fmt::format("non-finite loss at epoch {} batch {} (ce={}, kd={})",
                                        epoch, b, ce.item(), kd.item()),
                            epoch, b, state);
      }
      opt.zero_grad();
      loss.backward();
      opt.step();

      totals.ce += ce.item() * static_cast<double>(idx.size());
      totals.kd += kd.item() * static_cast<double>(idx.size());
      totals.correct += count_correct(student_logits, y);
      totals.seen += idx.size();
      totals.add_tau(tau, idx.size());
    }
    const double secs =
        s.record_wall_clock ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
    state->metrics.push_back(
        totals.finish(epoch, evaluate(state->student, data.test), lambda, secs));
    if (on_epoch) on_epoch(state->metrics.back());
  }
  return std::move(*state);
}

std::string GridRow::label() const { return tau ? format_number(*tau) : "learned"; }

std::vector<GridRow> grid_search_tau(const models::Model& teacher, const data::DatasetPair& data,
                                     const DistillConfig& base, std::span<const double> taus,
                                     std::span<const std::uint64_t> seeds, bool include_learned) {
  if (taus.empty()) throw ValidationError("grid search needs at least one tau value");
  if (seeds.empty()) throw ValidationError("grid search needs at least one seed");
  auto run_row = [&](const DistillConfig& cfg, std::optional<double> tau) {
    GridRow row{tau, {}, 0.0};
    for (auto seed : seeds) {
      const auto result = distill(teacher, data, cfg.with_seed(seed));
      row.accuracies.push_back(result.metrics.empty() ? evaluate(result.student, data.test)
                                                      : result.metrics.back().test_acc);
    }
    for (double a : row.accuracies) row.mean += a;
    row.mean /= static_cast<double>(row.accuracies.size());
    return row;
  };

  std::vector<GridRow> rows;
  for (double tau : taus) {
    DistillConfig cfg = base;
    cfg.temperature.reset();
    cfg.fixed_tau = tau;
    rows.push_back(run_row(cfg, tau));
  }
  if (include_learned) {
    DistillConfig cfg = base;
    cfg.fixed_tau.reset();
    if (!cfg.temperature) {
      distill::TemperatureSpec t;
      t.classes = cfg.student.classes;
      cfg.temperature = t;
    }
    rows.push_back(run_row(cfg, std::nullopt));
  }
  return rows;
}

}  // namespace ctkd::trainer
