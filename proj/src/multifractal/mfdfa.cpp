#include "qauction/multifractal/mfdfa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qauction::multifractal {

namespace {

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

LineFit ordinary_least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

/// Orthonormal basis of polynomials up to `order` sampled on s points.
Eigen::MatrixXd polynomial_basis(int s, int order) {
  Eigen::MatrixXd v(s, order + 1);
  for (int i = 0; i < s; ++i) {
    const double t = s > 1 ? 2.0 * i / (s - 1) - 1.0 : 0.0;  // [-1, 1] keeps the Vandermonde well conditioned
    double p = 1.0;
    for (int k = 0; k <= order; ++k, p *= t) v(i, k) = p;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  return qr.householderQ() * Eigen::MatrixXd::Identity(s, order + 1);
}

}  // namespace

bool HurstSpectrum::well_fit(double min_r2) const {
  return std::all_of(fit_r2.begin(), fit_r2.end(), [&](double r) { return r >= min_r2; });
}

std::vector<double> default_q_values() { return {-4, -3, -2, -1, 1, 2, 3, 4}; }

std::vector<int> log_spaced_scales(int min_scale, int max_scale, int count) {
  if (min_scale < 1 || max_scale < min_scale || count < 1)
    throw std::invalid_argument("log_spaced_scales: need 1 <= min <= max and count >= 1");
  std::set<int> out;
  if (count == 1) return {min_scale};
  const double step = std::log(static_cast<double>(max_scale) / min_scale) / (count - 1);
  for (int k = 0; k < count; ++k) out.insert(static_cast<int>(std::lround(min_scale * std::exp(step * k))));
  return {out.begin(), out.end()};
}

HurstSpectrum mfdfa(std::span<const double> series, const std::vector<double>& q_values,
                    const std::vector<int>& scales, int detrend_order) {
  if (q_values.empty()) throw std::invalid_argument("mfdfa: no q values");
  for (double q : q_values)
    if (q == 0.0 || !std::isfinite(q)) throw std::invalid_argument("mfdfa: q must be finite and non-zero");
  if (detrend_order < 0) throw std::invalid_argument("mfdfa: detrend order must be >= 0");
  if (scales.size() < 2) throw std::invalid_argument("mfdfa: need at least two scales");
  const int max_scale = *std::max_element(scales.begin(), scales.end());
  for (int s : scales)
    if (s < detrend_order + 2) throw std::invalid_argument("mfdfa: scale " + std::to_string(s) + " too small for detrending");
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  if (n < 4 * static_cast<std::ptrdiff_t>(max_scale))
    throw std::invalid_argument("mfdfa: series of length " + std::to_string(n) + " is shorter than 4 * max scale");

  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  Eigen::VectorXd profile(n);
  double acc = 0.0, spread = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double c = series[static_cast<std::size_t>(i)] - mean;
    spread = std::max(spread, std::abs(c));
    acc += c;
    profile(i) = acc;
  }
  if (!(spread > 0.0)) throw std::invalid_argument("mfdfa: constant series has zero fluctuation");

  HurstSpectrum out;
  out.q_values = q_values;
  out.scales = scales;
  out.log_fluctuation.assign(q_values.size(), std::vector<double>(scales.size()));

  for (std::size_t si = 0; si < scales.size(); ++si) {
    const int s = scales[si];
    const Eigen::MatrixXd basis = polynomial_basis(s, detrend_order);
    const std::ptrdiff_t windows = n / s;
    std::vector<double> variances;
    variances.reserve(static_cast<std::size_t>(2 * windows));
    auto window_variance = [&](std::ptrdiff_t start) {
      const Eigen::VectorXd y = profile.segment(start, s);
      const Eigen::VectorXd residual = y - basis * (basis.transpose() * y);
      return residual.squaredNorm() / s;
    };
    for (std::ptrdiff_t v = 0; v < windows; ++v) variances.push_back(window_variance(v * s));
    for (std::ptrdiff_t v = 0; v < windows; ++v) variances.push_back(window_variance(n - (v + 1) * s));

    for (std::size_t qi = 0; qi < q_values.size(); ++qi) {
      const double q = q_values[qi];
      // Work in logs: mean of exp((q/2) log F^2) with the maximum factored out.
      std::vector<double> logs;
      logs.reserve(variances.size());
      for (double v : variances) {
        if (!(v > 0.0)) throw std::invalid_argument("mfdfa: zero-variance window at scale " + std::to_string(s));
        logs.push_back(0.5 * q * std::log(v));
      }
      const double top = *std::max_element(logs.begin(), logs.end());
      double sum = 0.0;
      for (double l : logs) sum += std::exp(l - top);
      const double log_mean = top + std::log(sum / static_cast<double>(logs.size()));
      out.log_fluctuation[qi][si] = log_mean / q;
    }
  }

  std::vector<double> log_s;
  for (int s : scales) log_s.push_back(std::log(static_cast<double>(s)));
  for (std::size_t qi = 0; qi < q_values.size(); ++qi) {
    const auto fit = ordinary_least_squares(log_s, out.log_fluctuation[qi]);
    out.h.push_back(fit.slope);
    out.fit_r2.push_back(fit.r2);
  }
  return out;
}

double spectrum_width(const HurstSpectrum& spectrum) {
  if (spectrum.h.empty()) throw std::invalid_argument("spectrum_width: empty spectrum");
  const auto [lo, hi] = std::minmax_element(spectrum.h.begin(), spectrum.h.end());
  return *hi - *lo;
}

nlohmann::json spectrum_to_json(const HurstSpectrum& s) {
  return {{"q", s.q_values},
          {"h", s.h},
          {"r2", s.fit_r2},
          {"scales", s.scales},
          {"width", s.h.empty() ? 0.0 : spectrum_width(s)},
          {"well_fit", s.well_fit()}};
}

}  // namespace qauction::multifractal
