// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "ctkd/autodiff/tensor.hpp"

namespace ctkd::distill {

/// Batch mean of tau_i^2 * KL(softmax(q_t_i / tau_i) || softmax(q_s_i / tau_i)).
///
/// Teacher logits are detached. tau is a positive scalar or a B x 1 column
/// (one temperature per row); the gradient reaches the student logits and tau.
ad::Tensor kd_loss(const ad::Tensor& teacher_logits, const ad::Tensor& student_logits,
                   const ad::Tensor& tau);

/// Batch mean of -log softmax(logits)[label]. Labels must be in [0, C).
ad::Tensor cross_entropy(const ad::Tensor& logits, std::span<const int> labels);

/// alpha_ce * ce + alpha_kd * kd. Weights must be non-negative.
ad::Tensor total_loss(const ad::Tensor& ce, const ad::Tensor& kd, double alpha_ce, double alpha_kd);

}  // namespace ctkd::distill
