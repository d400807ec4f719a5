// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ctkd::data {

struct AugmentSpec {
  bool enabled = false;
  std::size_t pad = 2;
  double flip_prob = 0.5;
};

/// Per-image crop offset into the padded image, and flip decision.
struct AugmentDraw {
  std::size_t dy = 0;
  std::size_t dx = 0;
  bool flip = false;
};

AugmentDraw draw_augmentation(std::mt19937_64& rng, std::size_t pad, double flip_prob);

/// Seed for one batch of one epoch.
std::uint64_t augment_seed(std::uint64_t run_seed, std::size_t epoch, std::size_t batch_index);

/// Zero-pads each side x side image by `pad`, crops back to side x side at a
/// random offset in [0, 2*pad]^2, then mirrors columns with probability
/// flip_prob. `batch` holds rows of side*side pixels.
std::vector<double> augment(std::span<const double> batch, std::size_t side, std::size_t pad,
                            double flip_prob, std::uint64_t seed);

}  // namespace ctkd::data
