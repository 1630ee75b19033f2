#include "qauction/ps/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qauction/core/json.hpp"

namespace qauction::ps {

const char* to_string(Side side) { return side == Side::Buyer ? "buyer" : "seller"; }

Side side_from_string(const std::string& text) {
  if (text == "buyer") return Side::Buyer;
  if (text == "seller") return Side::Seller;
  throw std::invalid_argument("unknown side '" + text + "' (expected buyer or seller)");
}

void LogPriceGrid::validate() const {
  if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_min < q_max))
    throw std::invalid_argument("log-price grid needs finite q_min < q_max");
  if (n < 16) throw std::invalid_argument("log-price grid needs at least 16 points");
}

Eigen::VectorXd LogPriceGrid::weights() const {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, spacing());
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  return w;
}

int LogPriceGrid::nearest_index(double coord) const {
  const double tol = 1e-9 * spacing();
  if (!(coord >= q_min - tol && coord <= q_max + tol))
    throw std::out_of_range("coordinate " + std::to_string(coord) + " lies outside the grid");
  const auto i = static_cast<int>(std::lround((coord - q_min) / spacing()));
  return std::clamp(i, 0, n - 1);
}

TraderStrategy TraderStrategy::gaussian(std::string id, Side side, const LogPriceGrid& grid, double mean,
                                        double std_dev, double momentum) {
  grid.validate();
  if (!(std_dev > 0)) throw std::invalid_argument("gaussian trader needs std > 0");
  TraderStrategy t{std::move(id), side, grid, Eigen::VectorXcd(grid.n)};
  for (int i = 0; i < grid.n; ++i) {
    const double x = grid.coordinate(i);
    const double envelope = std::exp(-(x - mean) * (x - mean) / (4.0 * std_dev * std_dev));
    t.psi(i) = envelope * std::polar(1.0, momentum * x);
  }
  t.psi /= std::sqrt(t.mass());
  return t;
}

double TraderStrategy::mass() const { return grid.weights().dot(psi.cwiseAbs2()); }

double TraderStrategy::boundary_fraction() const {
  const Eigen::Index n = psi.size();
  const double dq = grid.spacing();
  const double edge = 0.5 * dq * (std::norm(psi(0)) + std::norm(psi(1)) + std::norm(psi(n - 2)) + std::norm(psi(n - 1)));
  return edge / mass();
}

void TraderStrategy::validate() const {
  grid.validate();
  if (psi.size() != grid.n)
    throw std::invalid_argument("trader '" + id + "': psi has " + std::to_string(psi.size()) + " samples, grid has " +
                                std::to_string(grid.n));
  const double total = mass();
  if (!std::isfinite(total) || !(total > 0)) throw std::invalid_argument("trader '" + id + "': mass must be finite and positive");
  if (!(boundary_fraction() < kBoundaryMassLimit))
    throw std::invalid_argument("trader '" + id + "': wavefunction is not contained in the grid (boundary mass)");
}

void RiskParams::validate() const {
  if (!(m > 0) || !std::isfinite(m)) throw std::invalid_argument("risk params: m must be positive");
  if (!(theta > 0) || !std::isfinite(theta)) throw std::invalid_argument("risk params: theta must be positive");
}

double RiskParams::omega() const { return 2.0 * std::numbers::pi / theta; }

namespace {

/// Node slopes of a density for cubic Hermite interpolation: centred differences,
/// one-sided at the ends, clamped to |s| <= 3 rho / h so the interpolant stays non-negative.
Eigen::VectorXd density_slopes(const Eigen::VectorXd& rho, double h) {
  const Eigen::Index n = rho.size();
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 1; i + 1 < n; ++i) s(i) = (rho(i + 1) - rho(i - 1)) / (2.0 * h);
  s(0) = (rho(1) - rho(0)) / h;
  s(n - 1) = (rho(n - 1) - rho(n - 2)) / h;
  for (Eigen::Index i = 0; i < n; ++i) s(i) = std::clamp(s(i), -3.0 * rho(i) / h, 3.0 * rho(i) / h);
  return s;
}

/// Integral over [0, t h] of the cubic Hermite interpolant on one cell of width h.
double hermite_partial(double ra, double sa, double rb, double sb, double h, double t) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  return h * (ra * (t4 / 2 - t3 + t) + h * sa * (t4 / 4 - 2 * t3 / 3 + t2 / 2) + rb * (t3 - t4 / 2) +
              h * sb * (t4 / 4 - t3 / 3));
}

/// Integral of the normalized density from the lower grid edge to `upper`, using the
/// piecewise cubic Hermite interpolant of the sampled density (fourth order for smooth states).
double cumulative_mass(const TraderStrategy& t, double upper) {
  const auto& g = t.grid;
  if (upper <= g.q_min) return 0.0;
  if (upper >= g.q_max) return 1.0;
  const double h = g.spacing();
  const Eigen::VectorXd rho = t.psi.cwiseAbs2() / t.mass();
  const Eigen::VectorXd s = density_slopes(rho, h);
  const auto cell = std::min(static_cast<int>(std::floor((upper - g.q_min) / h)), g.n - 2);
  double acc = 0.0;
  for (int i = 0; i < cell; ++i) acc += 0.5 * h * (rho(i) + rho(i + 1)) + h * h / 12.0 * (s(i) - s(i + 1));
  const double frac = std::clamp((upper - g.coordinate(cell)) / h, 0.0, 1.0);
  acc += hermite_partial(rho(cell), s(cell), rho(cell + 1), s(cell + 1), h, frac);
  return std::clamp(acc, 0.0, 1.0);
}

void require_price(double price) {
  if (!(price > 0) || !std::isfinite(price)) throw std::invalid_argument("price must be positive and finite");
}

/// d/dx with second-order central differences inside, second-order one-sided stencils at the ends.
Eigen::VectorXcd derivative(const Eigen::VectorXcd& f, double h) {
  const Eigen::Index n = f.size();
  Eigen::VectorXcd d(n);
  for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (f(i + 1) - f(i - 1)) / (2.0 * h);
  d(0) = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
  d(n - 1) = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h);
  return d;
}

}  // namespace

double buy_probability(const TraderStrategy& trader, double price) {
  require_price(price);
  if (trader.side != Side::Buyer) throw std::invalid_argument("buy_probability needs a buyer");
  return cumulative_mass(trader, std::log(price));
}

double sell_probability(const TraderStrategy& trader, double price) {
  require_price(price);
  if (trader.side != Side::Seller) throw std::invalid_argument("sell_probability needs a seller");
  return cumulative_mass(trader, -std::log(price));
}

double risk_inclination(const TraderStrategy& trader, const RiskParams& params) {
  trader.validate();
  params.validate();
  const auto& g = trader.grid;
  const Eigen::VectorXd w = g.weights();
  const Eigen::VectorXd rho = trader.psi.cwiseAbs2();
  const double norm = w.dot(rho);

  Eigen::VectorXd q(g.n);
  for (int i = 0; i < g.n; ++i) q(i) = g.coordinate(i);
  const double q0 = w.dot(q.cwiseProduct(rho)) / norm;
  const double var_q = w.dot((q.array() - q0).square().matrix().cwiseProduct(rho)) / norm;

  // P psi = -i d psi / dq
  const Eigen::VectorXcd p_psi = std::complex<double>(0, -1) * derivative(trader.psi, g.spacing());
  std::complex<double> p_mean(0, 0);
  for (int i = 0; i < g.n; ++i) p_mean += w(i) * std::conj(trader.psi(i)) * p_psi(i);
  const double p0 = p_mean.real() / norm;
  const double p2 = w.dot(p_psi.cwiseAbs2()) / norm;
  const double var_p = std::max(p2 - p0 * p0, 0.0);

  const double omega = params.omega();
  return var_p / (2.0 * params.m) + params.m * omega * omega * var_q / 2.0;
}

double sample_coordinate(const TraderStrategy& trader, Rng& rng) {
  const Eigen::VectorXd mass = trader.grid.weights().cwiseProduct(trader.psi.cwiseAbs2());
  const double total = mass.sum();
  if (!(total > 0)) throw std::invalid_argument("trader '" + trader.id + "' has no mass to sample");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < trader.grid.n; ++i) {
    if (mass(i) <= 0) continue;
    last_positive = i;
    acc += mass(i);
    if (u < acc) return trader.grid.coordinate(i);
  }
  return trader.grid.coordinate(last_positive);
}

std::pair<Division, ClearingOutcome> match_orders(const std::vector<TraderStrategy>& traders,
                                                  const std::map<std::string, double>& sampled) {
  struct Quote {
    std::string id;
    double log_price;
  };
  Division division;
  std::vector<Quote> bids, asks;
  for (const auto& t : traders) {
    const auto it = sampled.find(t.id);
    if (it == sampled.end()) throw std::invalid_argument("no sampled coordinate for trader '" + t.id + "'");
    if (t.side == Side::Buyer) {
      division.buyers.push_back(t.id);
      bids.push_back({t.id, it->second});
    } else {
      division.sellers.push_back(t.id);
      asks.push_back({t.id, -it->second});  // sells at e^{-p}
    }
  }
  std::sort(bids.begin(), bids.end(), [](const Quote& a, const Quote& b) {
    return a.log_price != b.log_price ? a.log_price > b.log_price : a.id < b.id;
  });
  std::sort(asks.begin(), asks.end(), [](const Quote& a, const Quote& b) {
    return a.log_price != b.log_price ? a.log_price < b.log_price : a.id < b.id;
  });

  ClearingOutcome outcome;
  outcome.collapsed = sampled;
  std::size_t matched = 0;
  while (matched < bids.size() && matched < asks.size() && bids[matched].log_price >= asks[matched].log_price)
    ++matched;
  if (matched == 0) return {division, outcome};

  const double price = std::exp(0.5 * (bids[matched - 1].log_price + asks[matched - 1].log_price));
  outcome.price = price;
  for (std::size_t k = 0; k < matched; ++k) {
    outcome.trades.push_back({bids[k].id, asks[k].id, price, bids[k].log_price, asks[k].log_price});
    outcome.flows.emplace_back(bids[k].id, -price);
    outcome.flows.emplace_back(asks[k].id, price);
  }
  return {division, outcome};
}

std::pair<Division, ClearingOutcome> clearing(const std::vector<TraderStrategy>& traders, std::uint64_t seed) {
  if (traders.empty()) throw std::invalid_argument("clearing needs at least one trader");
  std::map<std::string, double> sampled;
  const Rng root(seed);
  for (std::size_t k = 0; k < traders.size(); ++k) {
    if (sampled.count(traders[k].id)) throw std::invalid_argument("duplicate trader id '" + traders[k].id + "'");
    Rng rng = root.split(k);
    sampled[traders[k].id] = sample_coordinate(traders[k], rng);
  }
  return match_orders(traders, sampled);
}

TraderStrategy transaction_projection(const TraderStrategy& trader, double coord) {
  const int i = trader.grid.nearest_index(coord);
  TraderStrategy out = trader;
  out.psi.setZero();
  out.psi(i) = 1.0 / std::sqrt(trader.grid.weights()(i));
  return out;
}

RoundReport market_round(const std::vector<TraderStrategy>& traders, const RiskParams& params, std::uint64_t seed) {
  params.validate();
  RoundReport report;
  for (const auto& t : traders) report.risk_inclination[t.id] = risk_inclination(t, params);
  auto [division, outcome] = clearing(traders, seed);
  report.division = std::move(division);

  std::map<std::string, bool> matched;
  for (const auto& trade : outcome.trades) matched[trade.buyer] = matched[trade.seller] = true;
  report.traders.reserve(traders.size());
  for (const auto& t : traders)
    report.traders.push_back(matched.count(t.id) ? transaction_projection(t, outcome.collapsed.at(t.id)) : t);
  report.outcome = std::move(outcome);
  return report;
}

TraderStrategy trader_from_json(const nlohmann::json& j, const LogPriceGrid& grid) {
  if (!j.is_object() || !j.contains("id") || !j.contains("side"))
    throw std::invalid_argument("trader entries need id and side");
  const std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  const Side side = side_from_string(j.at("side").get<std::string>());
  TraderStrategy t;
  if (j.contains("gaussian")) {
    const auto& gsn = j.at("gaussian");
    t = TraderStrategy::gaussian(id, side, grid, gsn.at("mean").get<double>(), gsn.at("std").get<double>(),
                                 gsn.value("momentum", 0.0));
  } else if (j.contains("psi")) {
    const auto& p = j.at("psi");
    if (!p.is_array()) throw std::invalid_argument("trader '" + id + "': psi must be an array of [re, im]");
    t = TraderStrategy{id, side, grid, Eigen::VectorXcd(static_cast<Eigen::Index>(p.size()))};
    for (std::size_t i = 0; i < p.size(); ++i) t.psi(static_cast<Eigen::Index>(i)) = core::complex_from_json(p[i]);
  } else {
    throw std::invalid_argument("trader '" + id + "' needs psi or gaussian");
  }
  t.validate();
  return t;
}

nlohmann::json trader_to_json(const TraderStrategy& t) {
  auto psi = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.psi.size(); ++i) psi.push_back(core::complex_to_json(t.psi(i)));
  return {{"id", t.id}, {"side", to_string(t.side)}, {"psi", psi}};
}

Ensemble ensemble_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("trader ensemble must be a JSON object");
  Ensemble e;
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    e.grid.q_min = g.value("qmin", e.grid.q_min);
    e.grid.q_max = g.value("qmax", e.grid.q_max);
    e.grid.n = g.value("n", e.grid.n);
  }
  e.grid.validate();
  if (!j.contains("traders") || !j.at("traders").is_array() || j.at("traders").empty())
    throw std::invalid_argument("trader ensemble needs a non-empty traders array");
  for (const auto& t : j.at("traders")) e.traders.push_back(trader_from_json(t, e.grid));
  if (j.contains("risk")) {
    e.risk.m = j.at("risk").value("m", e.risk.m);
    e.risk.theta = j.at("risk").value("theta", e.risk.theta);
  }
  e.risk.validate();
  e.seed = j.value("seed", std::uint64_t{0});
  return e;
}

nlohmann::json report_to_json(const RoundReport& r) {
  nlohmann::json trades = nlohmann::json::array();
  for (const auto& t : r.outcome.trades)
    trades.push_back({{"buyer", t.buyer},
                      {"seller", t.seller},
                      {"price", t.price},
                      {"buyer_log_price", t.buyer_log_price},
                      {"seller_log_price", t.seller_log_price}});
  nlohmann::json flows = nlohmann::json::array();
  for (const auto& [id, flow] : r.outcome.flows) flows.push_back({{"id", id}, {"flow", flow}});
  return {{"division", {{"buyers", r.division.buyers}, {"sellers", r.division.sellers}}},
          {"price", r.outcome.price ? nlohmann::json(*r.outcome.price) : nlohmann::json(nullptr)},
          {"trades", trades},
          {"flows", flows},
          {"collapsed", r.outcome.collapsed},
          {"risk_inclination", r.risk_inclination}};
}

}  // namespace qauction::ps
