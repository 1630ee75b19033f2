#pragma once

#include <span>
#include <vector>

#include <json.hpp>

namespace qauction::multifractal {

/// Generalized Hurst exponents h(q) with per-q regression quality.
struct HurstSpectrum {
  std::vector<double> q_values;
  std::vector<double> h;
  std::vector<double> fit_r2;
  std::vector<int> scales;
  /// log F_q(s); one row per q, one column per scale.
  std::vector<std::vector<double>> log_fluctuation;

  /// True when every fit reaches `min_r2`.
  bool well_fit(double min_r2 = 0.95) const;
};

/// {-4, -3, -2, -1, 1, 2, 3, 4}
std::vector<double> default_q_values();

/// Roughly `count` distinct integer window sizes, log-spaced over [min_scale, max_scale].
std::vector<int> log_spaced_scales(int min_scale, int max_scale, int count);

/// Multifractal detrended fluctuation analysis.
///
/// The profile (cumulative sum of the mean-centred series) is cut into
/// floor(N/s) windows from each end; each window is detrended with a
/// least-squares polynomial of `detrend_order` and
/// F_q(s) = (mean_v F^2(v, s)^{q/2})^{1/q}. h(q) is the OLS slope of
/// log F_q(s) against log s. q = 0 is rejected.
HurstSpectrum mfdfa(std::span<const double> series, const std::vector<double>& q_values,
                    const std::vector<int>& scales, int detrend_order = 1);

/// max h - min h
double spectrum_width(const HurstSpectrum& spectrum);

nlohmann::json spectrum_to_json(const HurstSpectrum& spectrum);

}  // namespace qauction::multifractal
