// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace hdrf {

// Counter-based RNG: every draw is a pure hash of (seed, stream, counter),
// so any point of the stream can be reproduced from the iteration number
// alone. Checkpoint resume relies on this: no generator state is stored.

enum class RngStream : std::uint64_t {
  kGridInit = 1,
  kWeightInit = 2,
  kRayDraw = 3,
  kRayJitter = 4,
  kTrajectory = 5,
  kIblSampling = 6,
  kTest = 99,
};

namespace detail {
inline constexpr std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

inline constexpr std::uint64_t rng_u64(std::uint64_t seed, RngStream stream,
                                       std::uint64_t counter, std::uint64_t lane = 0) {
  std::uint64_t h = detail::splitmix(seed ^ 0x6a09e667f3bcc908ULL);
  h = detail::splitmix(h ^ static_cast<std::uint64_t>(stream));
  h = detail::splitmix(h ^ counter);
  return detail::splitmix(h ^ lane);
}

/// Uniform double in [0, 1).
inline constexpr double rng_uniform(std::uint64_t seed, RngStream stream,
                                    std::uint64_t counter, std::uint64_t lane = 0) {
  return static_cast<double>(rng_u64(seed, stream, counter, lane) >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline constexpr double rng_uniform(std::uint64_t seed, RngStream stream, std::uint64_t counter,
                                    std::uint64_t lane, double lo, double hi) {
  return lo + (hi - lo) * rng_uniform(seed, stream, counter, lane);
}

/// Uniform index in [0, n) without modulo bias.
inline constexpr std::uint64_t rng_index(std::uint64_t seed, RngStream stream,
                                         std::uint64_t counter, std::uint64_t lane,
                                         std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng_u64(seed, stream, counter, lane)) * n) >> 64);
}

/// Standard normal via Box-Muller on two sub-lanes of the same counter.
inline double rng_normal(std::uint64_t seed, RngStream stream, std::uint64_t counter,
                         std::uint64_t lane = 0) {
  const double u1 = 1.0 - rng_uniform(seed, stream, counter, lane * 2 + 1);  // (0, 1]
  const double u2 = rng_uniform(seed, stream, counter, lane * 2 + 2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace hdrf
