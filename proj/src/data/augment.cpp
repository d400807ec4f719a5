// SPDX-License-Identifier: Apache-2.0
#include "ctkd/data/augment.hpp"

#include "ctkd/errors.hpp"
#include "ctkd/rng.hpp"

namespace ctkd::data {

AugmentDraw draw_augmentation(std::mt19937_64& rng, std::size_t pad, double flip_prob) {
  std::uniform_int_distribution<std::size_t> offset(0, 2 * pad);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentDraw d;
  d.dy = offset(rng);
  d.dx = offset(rng);
  d.flip = coin(rng) < flip_prob;
  return d;
}

std::uint64_t augment_seed(std::uint64_t run_seed, std::size_t epoch, std::size_t batch_index) {
  return mix_seed(mix_seed(mix_seed(run_seed, streams::augment), epoch), batch_index);
}

std::vector<double> augment(std::span<const double> batch, std::size_t side, std::size_t pad,
                            double flip_prob, std::uint64_t seed) {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ValidationError("flip_prob must be in [0, 1]");
  const std::size_t area = side * side;
  if (area == 0 || batch.size() % area != 0) {
    throw ShapeError("augment: batch is not a whole number of side x side images");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> out(batch.size(), 0.0);
  const auto s = static_cast<std::ptrdiff_t>(side);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t b = 0; b < batch.size() / area; ++b) {
    const auto draw = draw_augmentation(rng, pad, flip_prob);
    const double* src = batch.data() + b * area;
    double* dst = out.data() + b * area;
    for (std::ptrdiff_t i = 0; i < s; ++i) {
      for (std::ptrdiff_t j = 0; j < s; ++j) {
        // Crop window starts at (dy, dx) in the padded image.
        const auto si = i + static_cast<std::ptrdiff_t>(draw.dy) - p;
        const auto sj = j + static_cast<std::ptrdiff_t>(draw.dx) - p;
        const double v = (si < 0 || sj < 0 || si >= s || sj >= s) ? 0.0 : src[si * s + sj];
        const auto col = draw.flip ? s - 1 - j : j;
        dst[i * s + col] = v;
      }
    }
  }
  return out;
}

}  // namespace ctkd::data
