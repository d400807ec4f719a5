// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::trainer {

struct SgdSettings {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// LR milestones as fractions of the total epoch count.
  std::vector<double> milestones{0.625, 0.75, 0.875};
  /// The LR is divided by this factor at every milestone.
  double decay = 10.0;

  void validate() const;
};

/// Milestone epochs (0-based epoch index from which the decayed LR applies).
std::vector<std::size_t> milestone_epochs(const SgdSettings& s, std::size_t total_epochs);
double lr_at_epoch(const SgdSettings& s, std::size_t total_epochs, std::size_t epoch);

/// v <- momentum * v + (g + wd * theta); theta <- theta - lr * v.
void sgd_update(std::span<double> theta, std::span<const double> grad, std::span<double> velocity,
                double lr, double momentum, double weight_decay);

/// SGD with momentum over parameter groups that share the LR and momentum
/// but carry their own weight decay.
class Sgd {
public:
  Sgd(SgdSettings settings, std::size_t total_epochs);

  void add_group(std::vector<ad::Tensor> params, double weight_decay);
  /// Applies the milestone schedule for this epoch.
  void set_epoch(std::size_t epoch);
  double lr() const { return lr_; }

  void zero_grad();
  /// Parameters that received no gradient are left untouched.
  void step();

  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

private:
  struct Slot {
    ad::Tensor param;
    double weight_decay;
  };
  SgdSettings settings_;
  std::size_t total_epochs_;
  double lr_;
  std::vector<Slot> slots_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace ctkd::trainer
