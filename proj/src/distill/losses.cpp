// SPDX-License-Identifier: Apache-2.0
#include "ctkd/distill/losses.hpp"

#include <string>
#include <vector>

#include "ctkd/autodiff/ops.hpp"
#include "ctkd/errors.hpp"

namespace ctkd::distill {

ad::Tensor kd_loss(const ad::Tensor& teacher_logits, const ad::Tensor& student_logits,
                   const ad::Tensor& tau) {
  if (teacher_logits.shape() != student_logits.shape()) {
    throw ShapeError("kd_loss: teacher logits " + ad::to_string(teacher_logits.shape()) +
                     " vs student logits " + ad::to_string(student_logits.shape()));
  }
  const auto kl_rows = ad::kl_div_rows(teacher_logits.detach(), student_logits, tau);
  return ad::mean(ad::mul(kl_rows, ad::square(tau)));
}

ad::Tensor cross_entropy(const ad::Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be B x C");
  const std::size_t rows = logits.shape()[0];
  const std::size_t cols = logits.shape()[1];
  if (labels.size() != rows) {
    throw ValidationError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(rows) + " rows");
  }
  std::vector<double> onehot(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[r]) +
                            " outside [0, " + std::to_string(cols) + ")");
    }
    onehot[r * cols + static_cast<std::size_t>(labels[r])] = 1.0;
  }
  const auto target = ad::Tensor::from({rows, cols}, std::move(onehot));
  const auto picked = ad::sum_rows(ad::mul(target, ad::log_softmax(logits, 1.0)));
  return ad::scale(ad::mean(picked), -1.0);
}

ad::Tensor total_loss(const ad::Tensor& ce, const ad::Tensor& kd, double alpha_ce, double alpha_kd) {
  if (!(alpha_ce >= 0.0) || !(alpha_kd >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
  return ad::add(ad::scale(ce, alpha_ce), ad::scale(kd, alpha_kd));
}

}  // namespace ctkd::distill
