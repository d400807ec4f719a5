// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "ctkd/autodiff/tensor.hpp"

// Differentiable operations. Unless stated otherwise, tensors are treated as
// B x C row-major matrices (rank-1 tensors are a single row).
//
// Binary element-wise ops accept identical shapes, a scalar against any
// tensor, or a B x 1 column against a B x C matrix (per-row broadcast).
namespace ctkd::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_constant(const Tensor& x, double c);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on any non-positive entry.
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

/// Sum / mean of all entries, shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Per-row sum, B x C -> B x 1.
Tensor sum_rows(const Tensor& x);

/// [M x K] . [K x N] -> [M x N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Adds a length-N bias to every row of a B x N matrix.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Joins two B x C matrices side by side into B x 2C (row i of the result is
/// row i of a followed by row i of b).
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// Row-wise softmax of x / temperature with max subtraction. temperature is
/// a scalar or a B x 1 column; gradient reaches both x and temperature.
Tensor softmax(const Tensor& x, const Tensor& temperature);
Tensor softmax(const Tensor& x, double temperature = 1.0);
/// Row-wise log-softmax of x / temperature.
Tensor log_softmax(const Tensor& x, const Tensor& temperature);
Tensor log_softmax(const Tensor& x, double temperature = 1.0);

/// Row-wise KL(softmax(p / temperature) || softmax(q / temperature)) as a
/// B x 1 column. Evaluated as log1p(sum_c p_c * g(d_c)) with d the
/// p-centred logit gap and g(v) = e^-v - 1 + v, so no large terms cancel
/// when the divergence is small relative to the logits.
Tensor kl_div_rows(const Tensor& p, const Tensor& q, const Tensor& temperature);

/// Identity forward; backward multiplies the upstream gradient by factor.
Tensor scale_gradient(const Tensor& x, double factor);

/// init + range * sigmoid(x), nudged to the open interval (init, init+range)
/// when rounding lands on an endpoint. Gradient is range * s * (1 - s).
Tensor bounded_sigmoid(const Tensor& x, double init, double range);

/// Single-channel 3x3 convolution with zero padding 1.
/// input: B x (side*side); kernel: K x 9; bias: K. Output B x (K*side*side),
/// laid out channel-major.
Tensor conv3x3(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t side);
/// 2x2 average pooling with stride 2 over B x (channels*side*side); odd
/// trailing rows/columns are dropped. Output B x (channels*(side/2)^2).
Tensor avg_pool2x2(const Tensor& input, std::size_t channels, std::size_t side);

}  // namespace ctkd::ad
