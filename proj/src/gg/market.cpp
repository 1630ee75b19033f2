#include "qauction/gg/market.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qauction/core/json.hpp"
#include "qauction/core/measurement.hpp"
#include "qauction/rng.hpp"

namespace qauction::gg {

namespace {

void check_truncation_guard(Complex xi, int n_max) {
  if (!(std::norm(xi) <= n_max / 4.0)) {
    std::ostringstream msg;
    msg << "truncation guard violated: |xi|^2 = " << std::norm(xi) << " exceeds n_max/4 = " << n_max / 4.0;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

LadderOperators ladder_operators(int n_max) {
  if (n_max < 1) throw std::invalid_argument("ladder_operators: n_max must be >= 1");
  core::ComplexMatrix<double> a = core::ComplexMatrix<double>::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  core::ComplexMatrix<double> adag = a.adjoint();
  return {core::Operator::dense(std::move(a)), core::Operator::dense(std::move(adag))};
}

core::Operator displacement(Complex xi, int n_max) {
  const auto ladder = ladder_operators(n_max);
  core::ComplexMatrix<double> g = xi * ladder.creation.to_dense() - std::conj(xi) * ladder.annihilation.to_dense();
  return core::exp_antihermitian(core::Operator::dense(std::move(g)));
}

core::Operator round_unitary(Complex xi0, Complex xi1, int n_max) {
  check_truncation_guard(xi0, n_max);
  check_truncation_guard(xi1, n_max);
  // The two mode generators commute, so the exponential factorizes.
  return core::kron(displacement(xi0, n_max), displacement(xi1, n_max));
}

void GGConfig::validate() const {
  if (n_max < 1) throw std::invalid_argument("gg config: n_max must be >= 1");
  if (rounds < 0) throw std::invalid_argument("gg config: rounds must be >= 0");
  if (tau.size() != static_cast<std::size_t>(rounds))
    throw std::invalid_argument("gg config: tau needs one entry per round");
  for (double t : tau)
    if (!std::isfinite(t) || t < 0) throw std::invalid_argument("gg config: tau entries must be finite and >= 0");
  if (!std::isfinite(lambda)) throw std::invalid_argument("gg config: lambda must be finite");
  if (!(p0 > 0) || !std::isfinite(p0)) throw std::invalid_argument("gg config: p0 must be positive");
  for (int j = 0; j < 2; ++j) {
    if (!std::isfinite(policy.beta[j].real()) || !std::isfinite(policy.beta[j].imag()) ||
        !std::isfinite(policy.gamma[j]) || !std::isfinite(policy.phase[j]))
      throw std::invalid_argument("gg config: xi policy entries must be finite");
  }
  if (!(leak_cap > 0)) throw std::invalid_argument("gg config: leak_cap must be positive");
}

TwoModeState::TwoModeState(int n_max, core::StateVector state) : n_max_(n_max), state_(std::move(state)) {
  if (n_max < 1) throw std::invalid_argument("two-mode state: n_max must be >= 1");
  if (state_.dim() != static_cast<Eigen::Index>(n_max + 1) * (n_max + 1))
    throw std::invalid_argument("two-mode state: dimension must be (n_max + 1)^2");
}

TwoModeState TwoModeState::vacuum(int n_max) { return occupation(n_max, 0, 0); }

TwoModeState TwoModeState::occupation(int n_max, int n0, int n1) {
  if (n0 < 0 || n1 < 0 || n0 > n_max || n1 > n_max) throw std::out_of_range("occupation outside truncation");
  const Eigen::Index d = n_max + 1;
  return TwoModeState(n_max, core::basis_state(d * d, static_cast<Eigen::Index>(n0) * d + n1));
}

double TwoModeState::boundary_mass() const {
  double mass = 0.0;
  for (int n = 0; n <= n_max_; ++n) {
    mass += state_.probability(index(n_max_, n));
    if (n != n_max_) mass += state_.probability(index(n, n_max_));
  }
  return mass;
}

std::pair<double, double> TwoModeState::mean_occupations() const {
  double m0 = 0.0, m1 = 0.0, total = 0.0;
  for (int n0 = 0; n0 <= n_max_; ++n0)
    for (int n1 = 0; n1 <= n_max_; ++n1) {
      const double p = state_.probability(index(n0, n1));
      m0 += n0 * p;
      m1 += n1 * p;
      total += p;
    }
  return {m0 / total, m1 / total};
}

std::pair<Complex, Complex> xi_policy_eval(const XiPolicy& policy, int k, const PriceSeries& history, double tau_k) {
  double last_return = 0.0;
  if (k > 0) {
    if (history.log_prices.size() < static_cast<std::size_t>(k) + 1)
      throw std::invalid_argument("xi_policy_eval: history shorter than round index");
    last_return = history.log_prices[k] - history.log_prices[k - 1];
  }
  const double scale = std::sqrt(tau_k);
  std::array<Complex, 2> xi;
  for (int j = 0; j < 2; ++j)
    xi[j] = (policy.beta[j] + policy.gamma[j] * last_return) * scale * std::polar(1.0, policy.phase[j]);
  return {xi[0], xi[1]};
}

RoundOutcome step_round(const TwoModeState& state, int k, const PriceSeries& history, const GGConfig& config,
                        std::uint64_t seed) {
  if (!state.state().is_normalized(core::kExternalNormTolerance))
    throw std::invalid_argument("step_round: state is not normalized");
  const auto [xi0, xi1] = xi_policy_eval(config.policy, k, history, config.tau.at(static_cast<std::size_t>(k)));
  check_truncation_guard(xi0, state.n_max());
  check_truncation_guard(xi1, state.n_max());

  // Same operator as round_unitary, applied factor by factor.
  const std::vector<core::Operator> factors{displacement(xi0, state.n_max()), displacement(xi1, state.n_max())};
  const TwoModeState evolved(state.n_max(), core::apply_tensor_product(factors, state.state()));

  const auto sample = core::sample_measurement(evolved.state(), 1, seed);
  const auto index = sample.records.front().outcome;
  const int d = state.n_max() + 1;
  const int n0 = static_cast<int>(index / d);
  const int n1 = static_cast<int>(index % d);

  return RoundOutcome{config.reset_each_round ? TwoModeState::vacuum(state.n_max())
                                              : TwoModeState::occupation(state.n_max(), n0, n1),
                      n0, n1, evolved.boundary_mass()};
}

double price_update(int n0, int n1, double log_price, double lambda) {
  if (n0 < 0 || n1 < 0) throw std::invalid_argument("price_update: occupations must be non-negative");
  return log_price + lambda * static_cast<double>(n1 - n0) / static_cast<double>(1 + n0 + n1);
}

PriceSeries run_market(const GGConfig& config) {
  config.validate();
  PriceSeries series;
  series.log_prices.reserve(static_cast<std::size_t>(config.rounds) + 1);
  series.occupations.reserve(static_cast<std::size_t>(config.rounds));
  series.log_prices.push_back(std::log(config.p0));

  const Rng root(config.seed);
  TwoModeState state = TwoModeState::vacuum(config.n_max);
  for (int k = 0; k < config.rounds; ++k) {
    auto round = step_round(state, k, series, config, root.split_seed(static_cast<std::uint64_t>(k)));
    series.max_boundary_mass = std::max(series.max_boundary_mass, round.boundary_mass);
    if (round.boundary_mass >= config.leak_cap) series.leak_warning = true;
    series.occupations.emplace_back(round.n0, round.n1);
    series.log_prices.push_back(price_update(round.n0, round.n1, series.log_prices.back(), config.lambda));
    state = std::move(round.state);
  }
  return series;
}

namespace {

std::array<double, 2> real_pair(const nlohmann::json& j, const char* key, std::array<double, 2> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2) throw std::invalid_argument(std::string("gg config: '") + key + "' needs 2 entries");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

GGConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("gg config must be a JSON object");
  GGConfig c;
  c.n_max = j.value("n_max", 16);
  c.rounds = j.value("rounds", 0);
  if (j.contains("tau")) {
    const auto& t = j.at("tau");
    if (t.is_number()) {
      c.tau.assign(static_cast<std::size_t>(std::max(c.rounds, 0)), t.get<double>());
    } else {
      c.tau = t.get<std::vector<double>>();
    }
  } else {
    c.tau.assign(static_cast<std::size_t>(std::max(c.rounds, 0)), 1.0);
  }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    if (!b.is_array() || b.size() != 2) throw std::invalid_argument("gg config: 'beta' needs 2 entries");
    c.policy.beta = {core::complex_from_json(b[0]), core::complex_from_json(b[1])};
  }
  c.policy.gamma = real_pair(j, "gamma", {0.0, 0.0});
  c.policy.phase = real_pair(j, "phase", {0.0, 0.0});
  c.lambda = j.value("lambda", 0.0);
  c.p0 = j.value("p0", 1.0);
  c.reset_each_round = j.value("reset_each_round", false);
  c.seed = j.value("seed", std::uint64_t{0});
  c.leak_cap = j.value("leak_cap", 1e-4);
  c.validate();
  return c;
}

nlohmann::json config_to_json(const GGConfig& c) {
  return {{"n_max", c.n_max},
          {"rounds", c.rounds},
          {"tau", c.tau},
          {"beta", {core::complex_to_json(c.policy.beta[0]), core::complex_to_json(c.policy.beta[1])}},
          {"gamma", c.policy.gamma},
          {"phase", c.policy.phase},
          {"lambda", c.lambda},
          {"p0", c.p0},
          {"reset_each_round", c.reset_each_round},
          {"seed", c.seed},
          {"leak_cap", c.leak_cap}};
}

nlohmann::json series_to_json(const PriceSeries& s) {
  auto occ = nlohmann::json::array();
  for (const auto& [n0, n1] : s.occupations) occ.push_back({n0, n1});
  return {{"log_prices", s.log_prices},
          {"occupations", occ},
          {"max_boundary_mass", s.max_boundary_mass},
          {"leak_warning", s.leak_warning}};
}

void write_csv(std::ostream& out, const PriceSeries& s) {
  out << "round,log_price,n0,n1\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < s.log_prices.size(); ++k) {
    out << k << ',' << s.log_prices[k] << ',';
    if (k > 0) out << s.occupations[k - 1].first << ',' << s.occupations[k - 1].second;
    else out << ',';
    out << '\n';
  }
}

std::vector<double> read_log_prices_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("price CSV is empty");
  // Locate the log_price column by header name.
  int column = -1;
  {
    std::stringstream header(line);
    std::string cell;
    for (int c = 0; std::getline(header, cell, ','); ++c) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (cell == "log_price") column = c;
    }
  }
  if (column < 0) throw std::invalid_argument("price CSV has no log_price column");
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= column; ++c)
      if (!std::getline(ss, cell, ',')) throw std::invalid_argument("price CSV row " + std::to_string(row) + " is short");
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw std::invalid_argument("price CSV row " + std::to_string(row) + ": bad log_price '" + cell + "'");
    }
  }
  return values;
}

}  // namespace qauction::gg
