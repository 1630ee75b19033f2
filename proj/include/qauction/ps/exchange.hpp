#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qauction/rng.hpp"

// Quantum bargaining market: each trader is a wavefunction over log-price
// (buyers in q, sellers in the conjugate p), a round samples reservation
// prices, matches them into a uniform-price double auction and collapses
// the matched traders onto their sampled coordinates.
namespace qauction::ps {

enum class Side { Buyer, Seller };

const char* to_string(Side side);
Side side_from_string(const std::string& text);

/// Uniform grid over a log-price coordinate.
struct LogPriceGrid {
  double q_min = -8.0;
  double q_max = 8.0;
  int n = 4096;

  void validate() const;
  double spacing() const { return (q_max - q_min) / (n - 1); }
  double coordinate(int i) const { return q_min + i * spacing(); }
  /// Trapezoidal quadrature weights.
  Eigen::VectorXd weights() const;
  int nearest_index(double coord) const;
};

struct TraderStrategy {
  std::string id;
  Side side = Side::Buyer;
  LogPriceGrid grid;
  Eigen::VectorXcd psi;  // samples of <q|psi> (buyers) or <p|psi> (sellers)

  /// Wavefunction whose density |psi|^2 is normal(mean, std), with an optional plane-wave phase.
  static TraderStrategy gaussian(std::string id, Side side, const LogPriceGrid& grid, double mean, double std_dev,
                                 double momentum = 0.0);

  /// Trapezoidal integral of |psi|^2.
  double mass() const;
  /// Fraction of the mass in the two outermost grid cells.
  double boundary_fraction() const;
  /// Grid, finite positive mass and boundary containment (< 1e-6).
  void validate() const;
};

inline constexpr double kBoundaryMassLimit = 1e-6;

struct RiskParams {
  double m = 1.0;
  double theta = 6.283185307179586;

  void validate() const;
  double omega() const;
};

struct Division {
  std::vector<std::string> buyers;
  std::vector<std::string> sellers;
};

struct Trade {
  std::string buyer;
  std::string seller;
  double price = 0.0;
  double buyer_log_price = 0.0;   // sampled reservation q
  double seller_log_price = 0.0;  // sampled ask -p
};

struct ClearingOutcome {
  std::optional<double> price;  // absent when nothing crosses
  std::vector<Trade> trades;
  /// Signed capital flow per matched trader, in trade order (buyer, seller, ...).
  std::vector<std::pair<std::string, double>> flows;
  /// Sampled coordinate per trader: q for buyers, p for sellers.
  std::map<std::string, double> collapsed;
};

/// Probability the buyer accepts price c or lower: integral of the normalized q-density up to ln c.
double buy_probability(const TraderStrategy& trader, double price);

/// Probability the seller accepts price c or greater: integral of the normalized p-density up to -ln c.
double sell_probability(const TraderStrategy& trader, double price);

/// <H> for H = (P - p0)^2 / 2m + m omega^2 (Q - q0)^2 / 2, with p0, q0 the state's own means.
double risk_inclination(const TraderStrategy& trader, const RiskParams& params);

/// Inverse-CDF draw of a grid coordinate from the trader's density.
double sample_coordinate(const TraderStrategy& trader, Rng& rng);

/// Uniform-price double auction on already sampled coordinates.
std::pair<Division, ClearingOutcome> match_orders(const std::vector<TraderStrategy>& traders,
                                                  const std::map<std::string, double>& sampled);

/// Samples every trader's coordinate from `seed` and matches the orders.
std::pair<Division, ClearingOutcome> clearing(const std::vector<TraderStrategy>& traders, std::uint64_t seed);

/// Collapses the trader onto the grid cell nearest `coord`.
TraderStrategy transaction_projection(const TraderStrategy& trader, double coord);

struct RoundReport {
  Division division;
  ClearingOutcome outcome;
  std::vector<TraderStrategy> traders;           // post-round states
  std::map<std::string, double> risk_inclination;  // pre-round states
};

RoundReport market_round(const std::vector<TraderStrategy>& traders, const RiskParams& params, std::uint64_t seed);

struct Ensemble {
  LogPriceGrid grid;
  std::vector<TraderStrategy> traders;
  RiskParams risk;
  std::uint64_t seed = 0;
};

Ensemble ensemble_from_json(const nlohmann::json& j);
nlohmann::json trader_to_json(const TraderStrategy& trader);
TraderStrategy trader_from_json(const nlohmann::json& j, const LogPriceGrid& grid);
nlohmann::json report_to_json(const RoundReport& report);

}  // namespace qauction::ps
