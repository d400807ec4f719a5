// SPDX-License-Identifier: Apache-2.0
#include "ctkd/trainer/optimizer.hpp"

#include <cmath>

#include "ctkd/errors.hpp"

namespace ctkd::trainer {

void SgdSettings::validate() const {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  if (!(decay > 0.0)) throw ValidationError("LR decay factor must be positive");
  for (double m : milestones) {
    if (!(m > 0.0 && m < 1.0)) throw ValidationError("LR milestones must be fractions in (0, 1)");
  }
}

std::vector<std::size_t> milestone_epochs(const SgdSettings& s, std::size_t total_epochs) {
  std::vector<std::size_t> out;
  for (double m : s.milestones) {
    out.push_back(static_cast<std::size_t>(std::lround(m * static_cast<double>(total_epochs))));
  }
  return out;
}

double lr_at_epoch(const SgdSettings& s, std::size_t total_epochs, std::size_t epoch) {
  double lr = s.lr;
  for (auto m : milestone_epochs(s, total_epochs)) {
    if (epoch >= m) lr /= s.decay;
  }
  return lr;
}

void sgd_update(std::span<double> theta, std::span<const double> grad, std::span<double> velocity,
                double lr, double momentum, double weight_decay) {
  if (theta.size() != grad.size() || theta.size() != velocity.size()) {
    throw ShapeError("sgd_update: parameter, gradient and velocity lengths differ");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity[i] = momentum * velocity[i] + (grad[i] + weight_decay * theta[i]);
    theta[i] -= lr * velocity[i];
  }
}

Sgd::Sgd(SgdSettings settings, std::size_t total_epochs)
    : settings_(std::move(settings)), total_epochs_(total_epochs), lr_(settings_.lr) {
  settings_.validate();
}

void Sgd::add_group(std::vector<ad::Tensor> params, double weight_decay) {
  for (auto& p : params) {
    velocity_.emplace_back(p.numel(), 0.0);
    slots_.push_back({std::move(p), weight_decay});
  }
}

void Sgd::set_epoch(std::size_t epoch) { lr_ = lr_at_epoch(settings_, total_epochs_, epoch); }

void Sgd::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

void Sgd::step() {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    auto& s = slots_[i];
    if (!s.param.has_grad()) continue;
    sgd_update(s.param.mutable_values(), s.param.grad(), velocity_[i], lr_, settings_.momentum,
               s.weight_decay);
  }
}

}  // namespace ctkd::trainer
