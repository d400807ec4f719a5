// SPDX-License-Identifier: Apache-2.0
#include "ctkd/curriculum/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctkd/errors.hpp"

namespace ctkd::curriculum {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::cosine: return "cosine";
    case Strategy::linear: return "linear";
    case Strategy::fixed_lambda: return "fixed";
    case Strategy::delayed_fixed: return "delayed";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "cosine") return Strategy::cosine;
  if (name == "linear") return Strategy::linear;
  if (name == "fixed" || name == "fixed_lambda") return Strategy::fixed_lambda;
  if (name == "delayed" || name == "delayed_fixed") return Strategy::delayed_fixed;
  throw ValidationError("unknown curriculum strategy '" + name + "'");
}

CurriculumSchedule CurriculumSchedule::cosine(double lambda_min, double lambda_max,
                                              std::size_t e_loops) {
  return {Strategy::cosine, lambda_min, lambda_max, e_loops, lambda_max, 1.0};
}

CurriculumSchedule CurriculumSchedule::linear(double lambda_min, double lambda_max,
                                              std::size_t e_loops) {
  return {Strategy::linear, lambda_min, lambda_max, e_loops, lambda_max, 1.0};
}

CurriculumSchedule CurriculumSchedule::fixed(double lambda) {
  return {Strategy::fixed_lambda, lambda, lambda, 1, lambda, 1.0};
}

CurriculumSchedule CurriculumSchedule::delayed(double lambda, std::size_t delay_epochs,
                                               double delay_tau) {
  return {Strategy::delayed_fixed, 0.0, lambda, delay_epochs, lambda, delay_tau};
}

void CurriculumSchedule::validate() const {
  if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max)) {
    throw ValidationError("lambda bounds must be finite");
  }
  if (lambda_min < 0.0) throw ValidationError("lambda_min must be >= 0");
  if (lambda_min > lambda_max) throw ValidationError("lambda_min must not exceed lambda_max");
  if ((strategy == Strategy::cosine || strategy == Strategy::linear) && e_loops == 0) {
    throw ValidationError("e_loops must be positive");
  }
  if (strategy == Strategy::fixed_lambda || strategy == Strategy::delayed_fixed) {
    if (fixed_value < lambda_min || fixed_value > lambda_max) {
      throw ValidationError("fixed lambda must lie in [lambda_min, lambda_max]");
    }
  }
  if (strategy == Strategy::delayed_fixed && !(delay_tau > 0.0)) {
    throw ValidationError("delay_tau must be positive");
  }
}

double CurriculumSchedule::lambda_at(std::size_t epoch) const {
  switch (strategy) {
    case Strategy::cosine: {
      const double progress =
          static_cast<double>(std::min(epoch, e_loops)) / static_cast<double>(e_loops);
      const double lam = lambda_min + 0.5 * (lambda_max - lambda_min) *
                                          (1.0 + std::cos((1.0 + progress) * std::numbers::pi));
      return std::clamp(lam, lambda_min, lambda_max);
    }
    case Strategy::linear: {
      const double progress =
          static_cast<double>(std::min(epoch, e_loops)) / static_cast<double>(e_loops);
      return lambda_min + (lambda_max - lambda_min) * progress;
    }
    case Strategy::fixed_lambda: return fixed_value;
    case Strategy::delayed_fixed: return epoch < e_loops ? 0.0 : fixed_value;
  }
  return 0.0;
}

}  // namespace ctkd::curriculum
