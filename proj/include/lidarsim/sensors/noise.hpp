#pragma once

#include "lidarsim/sensors/sensor_model.hpp"

#include <random>

namespace lidarsim {

using Rng = std::mt19937_64;

/// Seeds an independent stream for (seed, stream id).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Box-Muller on top of the raw engine; std::normal_distribution is not specified
// bit-for-bit across standard libraries.
inline double standard_normal(Rng& rng) {
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(rng() >> 11) * scale;
  const double u2 = static_cast<double>(rng() >> 11) * scale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0); }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// true_range plus Gaussian noise; non-positive results clamp to min_range.
inline double apply_range_noise(double true_range, const NoiseSpec& spec, Rng& rng, double min_range = 0.0) {
  require_positive(true_range, "true_range");
  if (spec.range_sigma == 0.0) return true_range;
  const double r = true_range + spec.range_sigma * standard_normal(rng);
  return r <= 0.0 ? min_range : r;
}

}  // namespace lidarsim
