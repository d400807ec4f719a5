// SPDX-License-Identifier: Apache-2.0
#include "ctkd/distill/grl.hpp"

#include <cmath>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/errors.hpp"

namespace ctkd::distill {

GrlGate::GrlGate(double lambda) : lambda_(0.0) { set_lambda(lambda); }

void GrlGate::set_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("gradient reversal lambda must be finite and >= 0");
  }
  lambda_ = lambda;
}

ad::Tensor GrlGate::apply(const ad::Tensor& x) const { return ad::scale_gradient(x, -lambda_); }

}  // namespace ctkd::distill
