#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace qauction::testing {

struct ChiSquare {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square of observed counts against expected probabilities.
/// Bins with expected count below `min_expected` are pooled into one tail bin.
inline ChiSquare chi_square(const std::vector<std::size_t>& observed, const std::vector<double>& probs,
                            double min_expected = 5.0) {
  if (observed.size() != probs.size()) throw std::invalid_argument("chi_square: size mismatch");
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  std::vector<double> obs_bins, exp_bins;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probs[i] * total;
    if (e >= min_expected) {
      obs_bins.push_back(static_cast<double>(observed[i]));
      exp_bins.push_back(e);
    } else {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += e;
    }
  }
  if (pooled_exp > 0.0 || pooled_obs > 0.0) {
    obs_bins.push_back(pooled_obs);
    exp_bins.push_back(pooled_exp);
  }
  ChiSquare out;
  for (std::size_t i = 0; i < obs_bins.size(); ++i) {
    if (exp_bins[i] <= 0.0) {
      if (obs_bins[i] > 0.0) out.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    const double d = obs_bins[i] - exp_bins[i];
    out.statistic += d * d / exp_bins[i];
  }
  out.dof = obs_bins.size() > 1 ? obs_bins.size() - 1 : 1;
  if (std::isinf(out.statistic)) {
    out.p_value = 0.0;
  } else {
    boost::math::chi_squared dist(static_cast<double>(out.dof));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  }
  return out;
}

}  // namespace qauction::testing
