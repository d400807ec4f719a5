// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace ctkd {

/// splitmix64 finalizer; derives independent stream seeds from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream ids used when splitting a run seed.
namespace streams {
inline constexpr std::uint64_t student_init = 1;
inline constexpr std::uint64_t temperature_init = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t augment = 4;
inline constexpr std::uint64_t teacher_init = 5;
}  // namespace streams

}  // namespace ctkd
