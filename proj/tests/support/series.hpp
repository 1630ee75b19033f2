#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qauction/rng.hpp"

namespace qauction::testing {

inline std::vector<double> white_noise(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(length);
  for (auto& x : out) x = rng.normal();
  return out;
}

/// Deterministic binomial multiplicative cascade on 2^levels points:
/// x_k = m0^{ones(k)} (1 - m0)^{levels - ones(k)}.
inline std::vector<double> binomial_cascade(int levels, double m0) {
  const std::size_t n = std::size_t{1} << levels;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int ones = std::popcount(k);
    out[k] = std::pow(m0, ones) * std::pow(1.0 - m0, levels - ones);
  }
  return out;
}

/// Analytic generalized Hurst exponent of the cascade:
/// h(q) = (tau(q) + 1) / q with tau(q) = -log2(m0^q + (1 - m0)^q).
inline double cascade_hurst(double q, double m0) {
  const double tau = -std::log2(std::pow(m0, q) + std::pow(1.0 - m0, q));
  return (tau + 1.0) / q;
}

}  // namespace qauction::testing
