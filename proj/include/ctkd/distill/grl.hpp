// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::distill {

/// Gradient reversal: identity on the forward pass, multiplies the incoming
/// gradient by -lambda on the way back. Placing it between the temperature
/// module and the loss turns the shared descent step into ascent for the
/// module, scaled by the curriculum's lambda.
class GrlGate {
public:
  explicit GrlGate(double lambda = 0.0);
  double lambda() const { return lambda_; }
  void set_lambda(double lambda);
  ad::Tensor apply(const ad::Tensor& x) const;

private:
  double lambda_;
};

}  // namespace ctkd::distill
