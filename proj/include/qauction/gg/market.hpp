#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qauction/core/operator.hpp"
#include "qauction/core/state.hpp"

// Single-asset bosonic market: two modes counting sellers (mode 0) and
// buyers (mode 1), driven each trading round by a displacement unitary.
namespace qauction::gg {

using Complex = std::complex<double>;

struct LadderOperators {
  core::Operator annihilation;
  core::Operator creation;
};

/// Truncated ladder operators on occupations 0..n_max.
LadderOperators ladder_operators(int n_max);

/// exp(xi a^dagger - conj(xi) a) on one truncated mode.
core::Operator displacement(Complex xi, int n_max);

/// exp(sum_j xi_j a_j^dagger - conj(xi_j) a_j) on the two-mode space,
/// index n0 * (n_max + 1) + n1. Requires |xi_j|^2 <= n_max / 4.
core::Operator round_unitary(Complex xi0, Complex xi1, int n_max);

/// Drive policy: xi_j = (beta_j + gamma_j * r_prev) * sqrt(tau_k) * exp(i phase_j).
struct XiPolicy {
  std::array<Complex, 2> beta{};
  std::array<double, 2> gamma{};
  std::array<double, 2> phase{};
};

struct GGConfig {
  int n_max = 16;
  int rounds = 0;
  std::vector<double> tau;  // one duration per round
  XiPolicy policy;
  double lambda = 0.0;  // price impact per unit normalized imbalance
  double p0 = 1.0;
  bool reset_each_round = false;
  std::uint64_t seed = 0;
  double leak_cap = 1e-4;  // allowed probability on the n = n_max levels

  void validate() const;
};

struct PriceSeries {
  std::vector<double> log_prices;               // rounds + 1 entries
  std::vector<std::pair<int, int>> occupations;  // (n0, n1) per round
  double max_boundary_mass = 0.0;
  bool leak_warning = false;
};

class TwoModeState {
 public:
  static TwoModeState vacuum(int n_max);
  static TwoModeState occupation(int n_max, int n0, int n1);
  TwoModeState(int n_max, core::StateVector state);

  int n_max() const noexcept { return n_max_; }
  const core::StateVector& state() const noexcept { return state_; }
  Eigen::Index index(int n0, int n1) const { return static_cast<Eigen::Index>(n0) * (n_max_ + 1) + n1; }

  /// Probability on levels where either mode sits at n_max.
  double boundary_mass() const;

  std::pair<double, double> mean_occupations() const;

 private:
  int n_max_;
  core::StateVector state_;
};

std::pair<Complex, Complex> xi_policy_eval(const XiPolicy& policy, int k, const PriceSeries& history, double tau_k);

struct RoundOutcome {
  TwoModeState state;
  int n0 = 0;
  int n1 = 0;
  double boundary_mass = 0.0;  // measured before collapse
};

/// One trading round: evolve, check truncation leakage, collapse on (n0, n1).
RoundOutcome step_round(const TwoModeState& state, int k, const PriceSeries& history, const GGConfig& config,
                        std::uint64_t seed);

/// log p + lambda (n1 - n0) / (1 + n0 + n1)
double price_update(int n0, int n1, double log_price, double lambda);

PriceSeries run_market(const GGConfig& config);

GGConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const GGConfig& config);
nlohmann::json series_to_json(const PriceSeries& series);

/// Columns round,log_price,n0,n1; round 0 carries the initial price only.
void write_csv(std::ostream& out, const PriceSeries& series);

/// Reads the log_price column of a file produced by write_csv.
std::vector<double> read_log_prices_csv(std::istream& in);

}  // namespace qauction::gg
