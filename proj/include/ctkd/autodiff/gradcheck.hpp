// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::ad {

/// Compares the reverse-mode gradient of a scalar function with central
/// differences, one coordinate of `leaf` at a time.
///
/// `f` must rebuild its graph from the current values of `leaf` on every
/// call. Returns max_i |analytic_i - numeric_i| / max(1e-12, |numeric_i|).
/// The leaf's values are restored and its gradient is left populated with
/// the analytic result.
double finite_difference_check(const std::function<Tensor()>& f, Tensor leaf, double eps = 1e-5);

}  // namespace ctkd::ad
