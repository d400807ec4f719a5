// SPDX-License-Identifier: Apache-2.0
#include "ctkd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctkd/errors.hpp"

namespace ctkd::ad {

double finite_difference_check(const std::function<Tensor()>& f, Tensor leaf, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_difference_check: eps must be positive");
  if (!leaf.requires_grad()) throw ContractError("finite_difference_check: leaf has no gradient");

  leaf.zero_grad();
  f().backward();
  const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
  if (analytic.size() != leaf.numel()) {
    throw ContractError("finite_difference_check: leaf is not reachable from f");
  }

  auto x = leaf.mutable_values();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f().item();
    x[i] = saved - eps;
    const double down = f().item();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ctkd::ad
