// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

namespace ctkd::curriculum {

enum class Strategy { cosine, linear, fixed_lambda, delayed_fixed };

std::string to_string(Strategy s);
/// Accepts cosine | linear | fixed | fixed_lambda | delayed | delayed_fixed.
Strategy parse_strategy(const std::string& name);

/// Trajectory of the gradient-reversal magnitude lambda over epochs.
///
/// cosine ramps lambda_min -> lambda_max along half a cosine period over
/// e_loops epochs and holds afterwards; linear ramps with a straight line;
/// fixed_lambda is constant; delayed_fixed emits 0 for the first e_loops
/// epochs (plain distillation at delay_tau) and fixed_value afterwards.
struct CurriculumSchedule {
  Strategy strategy = Strategy::cosine;
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  std::size_t e_loops = 10;
  double fixed_value = 1.0;
  double delay_tau = 1.0;

  static CurriculumSchedule cosine(double lambda_min = 0.0, double lambda_max = 1.0,
                                   std::size_t e_loops = 10);
  static CurriculumSchedule linear(double lambda_min = 0.0, double lambda_max = 1.0,
                                   std::size_t e_loops = 10);
  static CurriculumSchedule fixed(double lambda);
  static CurriculumSchedule delayed(double lambda, std::size_t delay_epochs, double delay_tau);

  /// Throws ValidationError.
  void validate() const;

  /// lambda for 0-based epoch index.
  double lambda_at(std::size_t epoch) const;

  /// True while delayed_fixed is still in its plain-distillation phase.
  bool in_delay(std::size_t epoch) const {
    return strategy == Strategy::delayed_fixed && epoch < e_loops;
  }
};

}  // namespace ctkd::curriculum
