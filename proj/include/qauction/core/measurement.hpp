#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qauction/core/state.hpp"
#include "qauction/rng.hpp"

namespace qauction::core {

struct MeasurementRecord {
  Eigen::Index outcome = 0;
  double probability = 0.0;
  std::uint64_t seed = 0;
};

struct MeasurementSample {
  std::vector<std::size_t> histogram;  // one bin per basis index
  std::vector<MeasurementRecord> records;
};

/// Cumulative Born distribution of a state, last entry forced to 1.
template <class Real>
std::vector<double> born_cdf(const BasicStateVector<Real>& psi) {
  std::vector<double> cdf(static_cast<std::size_t>(psi.dim()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    acc += static_cast<double>(psi.probability(i));
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  for (auto& c : cdf) c /= acc;
  return cdf;
}

/// Draws one index from a cumulative distribution; zero-probability bins are never returned.
inline Eigen::Index draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) it = std::prev(cdf.end());
  // Skip bins whose cumulative value did not advance (zero mass).
  auto idx = static_cast<Eigen::Index>(it - cdf.begin());
  while (idx > 0 && cdf[static_cast<std::size_t>(idx)] == cdf[static_cast<std::size_t>(idx - 1)]) --idx;
  return idx;
}

/// Independent Born-rule samples of psi, reproducible from `seed`.
template <class Real>
MeasurementSample sample_measurement(const BasicStateVector<Real>& psi, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("sample_measurement: count must be positive");
  if (!psi.is_normalized(Real(kExternalNormTolerance)))
    throw std::invalid_argument("sample_measurement: state is not normalized");
  const auto cdf = born_cdf(psi);
  Rng rng(seed);
  MeasurementSample out;
  out.histogram.assign(static_cast<std::size_t>(psi.dim()), 0);
  out.records.reserve(count);
  const double norm2 = static_cast<double>(psi.amplitudes().squaredNorm());
  for (std::size_t n = 0; n < count; ++n) {
    const Eigen::Index k = draw_from_cdf(cdf, rng);
    ++out.histogram[static_cast<std::size_t>(k)];
    out.records.push_back({k, static_cast<double>(psi.probability(k)) / norm2, seed});
  }
  return out;
}

}  // namespace qauction::core
