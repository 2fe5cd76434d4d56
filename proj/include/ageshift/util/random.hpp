// Copyright 2026 The ageshift Authors
// SPDX-License-Identifier: Apache-2.0

// Portable draws from mt19937_64. The standard distributions are
// implementation-defined, which would make seeded artifacts differ between
// standard libraries.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace ageshift {

// Uniform integer in [0, n), n > 0, by rejection.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

// Uniform double in [0, 1) with 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace ageshift
