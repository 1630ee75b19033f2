#include "qauction/hp/auction.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qauction/core/json.hpp"
#include "qauction/core/measurement.hpp"
#include "qauction/rng.hpp"

namespace qauction::hp {

using core::Operator;
using core::StateVector;
using Vector = Eigen::VectorXcd;

void BidderRegister::validate() const {
  if (p_item < 1 || p_price < 1) throw std::invalid_argument("bidder register needs p_item >= 1 and p_price >= 1");
  if (bits() > 30) throw std::invalid_argument("bidder register wider than 30 qubits");
}

void BidSuperposition::validate(double norm_tolerance) const {
  reg.validate();
  if (terms.empty()) throw std::invalid_argument("bid '" + bidder_id + "' has no terms");
  std::set<Eigen::Index> seen;
  double weight = 0.0;
  for (const auto& t : terms) {
    const Eigen::Index k = encode_term(t, reg);
    if (!seen.insert(k).second)
      throw std::invalid_argument("bid '" + bidder_id + "' repeats bundle " + std::to_string(t.bundle) + " at level " +
                                  std::to_string(t.price_level));
    if (!std::isfinite(t.amplitude.real()) || !std::isfinite(t.amplitude.imag()))
      throw std::invalid_argument("bid '" + bidder_id + "' has a non-finite amplitude");
    weight += std::norm(t.amplitude);
  }
  if (!(std::abs(weight - 1.0) <= norm_tolerance))
    throw std::invalid_argument("bid '" + bidder_id + "' is not normalized (sum |a|^2 = " + std::to_string(weight) + ")");
}

StateVector BidSuperposition::vector() const {
  Vector v = Vector::Zero(reg.dim());
  for (const auto& t : terms) v(encode_term(t, reg)) += t.amplitude;
  return StateVector(std::move(v));
}

double AuctionInstance::default_penalty(const BidderRegister& reg, int bidders, double tick) {
  return bidders * std::ldexp(1.0, reg.p_price) * tick + 1.0;
}

AuctionInstance AuctionInstance::make(int items, BidderRegister reg, int bidders, double tick) {
  AuctionInstance a{items, reg, bidders, tick, default_penalty(reg, bidders, tick)};
  a.validate();
  return a;
}

void AuctionInstance::validate() const {
  reg.validate();
  if (items < 1 || items > reg.p_item) throw std::invalid_argument("auction: items must lie in [1, p_item]");
  if (bidders < 1) throw std::invalid_argument("auction: needs at least one bidder");
  if (!(tick > 0) || !std::isfinite(tick)) throw std::invalid_argument("auction: tick must be positive");
  const double max_revenue = std::ldexp(1.0, reg.p_price) * tick * bidders;
  if (!(penalty > max_revenue) || !std::isfinite(penalty))
    throw std::invalid_argument("auction: penalty W must exceed 2^p_price * tick * n = " + std::to_string(max_revenue));
}

void SearchConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("search: steps must be >= 1");
  if (!(dt > 0) || !std::isfinite(dt * steps)) throw std::invalid_argument("search: dt must be positive and steps*dt finite");
  if (runs < 1) throw std::invalid_argument("search: runs must be >= 1");
}

Eigen::Index encode_term(const BidTerm& term, const BidderRegister& reg) {
  if (term.bundle >> reg.p_item)
    throw std::out_of_range("bundle " + std::to_string(term.bundle) + " needs more than " + std::to_string(reg.p_item) +
                            " item bits");
  if (term.price_level >> reg.p_price)
    throw std::out_of_range("price level " + std::to_string(term.price_level) + " needs more than " +
                            std::to_string(reg.p_price) + " price bits");
  return (Eigen::Index{term.bundle} << reg.p_price) | Eigen::Index{term.price_level};
}

Operator bidder_unitary(const BidSuperposition& bid) {
  bid.validate();
  const Vector v = bid.vector().amplitudes();
  const Eigen::Index d = v.size();
  const double theta = std::abs(v(0)) > 0 ? std::arg(v(0)) : 0.0;
  // Reflection taking e0 to w = e^{-i theta} v (w0 real); column 0 is then v up to rounding, so store v exactly.
  const Vector w = v * std::polar(1.0, -theta);
  Vector u = -w;
  u(0) += 1.0;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(d, d);
  const double uu = u.squaredNorm();
  if (uu > 1e-30) m -= (2.0 / uu) * u * u.adjoint();
  m.col(0) = v;
  return Operator::unitary(std::move(m), 1e-10);
}

void validate_bids(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance) {
  instance.validate();
  if (static_cast<int>(bids.size()) != instance.bidders)
    throw std::invalid_argument("auction expects " + std::to_string(instance.bidders) + " bids, got " +
                                std::to_string(bids.size()));
  for (const auto& b : bids) {
    if (!(b.reg == instance.reg)) throw std::invalid_argument("bid '" + b.bidder_id + "' has a different register shape");
    b.validate();
    for (const auto& t : b.terms)
      if (t.bundle >> instance.items)
        throw std::invalid_argument("bid '" + b.bidder_id + "' requests an item beyond the " +
                                    std::to_string(instance.items) + " on sale");
  }
}

StateVector joint_initial(const std::vector<BidSuperposition>& bids) {
  if (bids.empty()) throw std::invalid_argument("joint_initial: no bids");
  StateVector psi = bids.front().vector();
  for (std::size_t k = 1; k < bids.size(); ++k) {
    if (!(bids[k].reg == bids.front().reg)) throw std::invalid_argument("joint_initial: register shapes differ");
    psi = core::tensor(psi, bids[k].vector());
  }
  return psi;
}

Outcome outcome_of_index(Eigen::Index index, const AuctionInstance& instance) {
  const int p = instance.reg.bits();
  const int n = instance.bidders;
  if (p * n > 62) throw std::invalid_argument("outcome_of_index: joint register too wide");
  if (index < 0 || index >= (Eigen::Index{1} << (p * n))) throw std::out_of_range("outcome_of_index: index out of range");
  const Eigen::Index reg_mask = (Eigen::Index{1} << p) - 1;
  const std::uint32_t level_mask = (1u << instance.reg.p_price) - 1;
  Outcome out;
  out.per_bidder.resize(static_cast<std::size_t>(n));
  std::uint64_t taken = 0;
  std::uint64_t levels = 0;
  for (int k = 0; k < n; ++k) {
    const auto r = static_cast<std::uint32_t>((index >> ((n - 1 - k) * p)) & reg_mask);
    auto& a = out.per_bidder[static_cast<std::size_t>(k)];
    a.wins = r != 0;
    if (!a.wins) continue;
    a.bundle = r >> instance.reg.p_price;
    a.price_level = r & level_mask;
    if ((taken & a.bundle) != 0 || (a.bundle >> instance.items) != 0) out.feasible = false;
    taken |= a.bundle;
    levels += a.price_level;
  }
  out.revenue = out.feasible ? instance.tick * static_cast<double>(levels) : 0.0;
  return out;
}

namespace {

void require_searchable(const AuctionInstance& instance) {
  instance.validate();
  if (instance.joint_bits() > kMaxJointBits)
    throw std::invalid_argument("joint register of " + std::to_string(instance.joint_bits()) + " qubits exceeds the " +
                                std::to_string(kMaxJointBits) + "-qubit simulation limit");
}

Eigen::VectorXd energies(const AuctionInstance& instance) {
  const Eigen::Index dim = Eigen::Index{1} << instance.joint_bits();
  Eigen::VectorXd e(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Outcome o = outcome_of_index(i, instance);
    e(i) = o.feasible ? -o.revenue : instance.penalty;
  }
  return e;
}

// exp(-i tau H) v by Lanczos on the Krylov space of a hermitian H given as a matvec.
// Callers keep ||tau H|| <= 1, where m = 20 leaves a truncation error far below rounding.
template <class MatVec>
Vector expm_krylov(const MatVec& h, const Vector& v, double tau, int m_max = 20) {
  const double beta0 = v.norm();
  if (beta0 == 0.0) return v;
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(m_max, v.size()));
  Eigen::MatrixXcd basis(v.size(), m_cap);
  Eigen::VectorXd alpha(m_cap), beta(m_cap);
  basis.col(0) = v / beta0;
  int m = m_cap;
  for (int j = 0; j < m_cap; ++j) {
    Vector w = h(basis.col(j));
    alpha(j) = basis.col(j).dot(w).real();
    w -= alpha(j) * basis.col(j);
    if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
    for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
    beta(j) = w.norm();
    if (j + 1 == m_cap) break;
    if (beta(j) < 1e-13) {
      m = j + 1;
      break;
    }
    basis.col(j + 1) = w / beta(j);
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    t(j, j) = alpha(j);
    if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta(j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
  const Eigen::MatrixXd& q = eig.eigenvectors();
  Vector y = Vector::Zero(m);
  for (int k = 0; k < m; ++k) y += q.col(k) * (q(0, k) * std::polar(1.0, -tau * eig.eigenvalues()(k)));
  return beta0 * (basis.leftCols(m) * y);
}

}  // namespace

Operator problem_hamiltonian(const AuctionInstance& instance) {
  require_searchable(instance);
  return Operator::hermitian_diagonal(energies(instance).cast<std::complex<double>>());
}

StateVector adiabatic_evolve(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance, int steps,
                             double dt, const StepObserver& observer) {
  require_searchable(instance);
  validate_bids(bids, instance);
  SearchConfig{steps, dt, 0, 1}.validate();
  const Vector psi0 = joint_initial(bids).amplitudes();
  Eigen::VectorXd hp = energies(instance);
  const double scale = hp.cwiseAbs().maxCoeff();
  if (scale > 0) hp /= scale;

  // ||H(s)|| <= (1 - s) + s = 1, so sub-steps of length <= 1 keep ||tau H|| <= 1.
  const int sub = static_cast<int>(std::ceil(dt));
  const double tau = dt / sub;
  Vector psi = psi0;
  for (int k = 1; k <= steps; ++k) {
    const double s = static_cast<double>(k) / steps;
    auto h = [&](const auto& x) -> Vector {
      Vector out = (1.0 - s) * (x - psi0 * psi0.dot(x));
      out += s * hp.cwiseProduct(x);
      return out;
    };
    for (int r = 0; r < sub; ++r) psi = expm_krylov(h, psi, tau);
    if (observer) observer(k, StateVector(psi));
  }
  return StateVector(std::move(psi));
}

namespace {

SearchResult measure(const StateVector& final_state, const AuctionInstance& instance, std::uint64_t seed) {
  const auto sample = core::sample_measurement(final_state, 1, seed);
  const Eigen::Index index = sample.records.front().outcome;
  return {index, outcome_of_index(index, instance), final_state};
}

bool same_revenue(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

SearchResult adiabatic_search(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance,
                              const SearchConfig& config, const StepObserver& observer) {
  config.validate();
  return measure(adiabatic_evolve(bids, instance, config.steps, config.dt, observer), instance, config.seed);
}

OracleResult brute_force_wda(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance) {
  validate_bids(bids, instance);
  double cases = 1.0;
  for (const auto& b : bids) cases *= static_cast<double>(b.terms.size() + 1);
  if (cases > 1e7) throw std::invalid_argument("brute_force_wda: more than 1e7 combinations to enumerate");

  const std::size_t n = bids.size();
  std::vector<std::size_t> choice(n, 0);
  OracleResult best;
  bool have_best = false;
  std::uint64_t best_levels = 0;
  while (true) {
    std::uint64_t taken = 0;
    std::uint64_t levels = 0;
    bool feasible = true;
    for (std::size_t k = 0; k < n && feasible; ++k) {
      if (choice[k] == bids[k].terms.size()) continue;
      const auto& t = bids[k].terms[choice[k]];
      if (taken & t.bundle) feasible = false;
      taken |= t.bundle;
      levels += t.price_level;
    }
    // Enumeration is lexicographic, so a strict improvement keeps the smallest tied choice vector.
    if (feasible && (!have_best || levels > best_levels)) {
      have_best = true;
      best_levels = levels;
      best.choice = choice;
    }
    // Odometer step, last bidder fastest; stops after wrapping the first bidder.
    std::size_t k = n;
    while (k > 0 && ++choice[k - 1] > bids[k - 1].terms.size()) choice[--k] = 0;
    if (k == 0) break;
  }
  best.outcome.per_bidder.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (best.choice[k] == bids[k].terms.size()) continue;
    const auto& t = bids[k].terms[best.choice[k]];
    auto& a = best.outcome.per_bidder[k];
    a.wins = encode_term(t, instance.reg) != 0;
    if (a.wins) {
      a.bundle = t.bundle;
      a.price_level = t.price_level;
    }
  }
  best.revenue = best.outcome.revenue = instance.tick * static_cast<double>(best_levels);
  return best;
}

AuctionStats run_auction(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance,
                         const SearchConfig& config) {
  config.validate();
  AuctionStats stats;
  stats.runs = config.runs;
  stats.oracle = brute_force_wda(bids, instance);
  const StateVector final_state = adiabatic_evolve(bids, instance, config.steps, config.dt);
  const Rng root(config.seed);
  std::map<Eigen::Index, OutcomeStats> seen;
  std::size_t successes = 0, voids = 0;
  double revenue = 0.0;
  for (int r = 0; r < config.runs; ++r) {
    SearchResult res = measure(final_state, instance, root.split_seed(static_cast<std::uint64_t>(r)));
    auto& slot = seen[res.index];
    slot.index = res.index;
    slot.outcome = res.outcome;
    ++slot.count;
    if (!res.outcome.feasible) {
      ++voids;
    } else {
      revenue += res.outcome.revenue;
      if (same_revenue(res.outcome.revenue, stats.oracle.revenue)) ++successes;
    }
    if (r == 0) stats.first = std::move(res);
  }
  for (auto& [index, s] : seen) stats.outcomes.push_back(std::move(s));
  stats.success_rate = static_cast<double>(successes) / config.runs;
  stats.void_rate = static_cast<double>(voids) / config.runs;
  stats.mean_revenue = revenue / config.runs;
  return stats;
}

namespace {

std::string bit_string(std::uint32_t value, int width) {
  std::string s(static_cast<std::size_t>(width), '0');
  for (int b = 0; b < width; ++b)
    if (value >> b & 1u) s[static_cast<std::size_t>(width - 1 - b)] = '1';
  return s;
}

std::uint32_t bundle_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint32_t>();
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v < 0) throw std::invalid_argument("bundle must be non-negative");
    return static_cast<std::uint32_t>(v);
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.empty() || s.size() > 30 || s.find_first_not_of("01") != std::string::npos)
      throw std::invalid_argument("bundle string '" + s + "' must be a bit string such as \"01\"");
    return static_cast<std::uint32_t>(std::stoul(s, nullptr, 2));
  }
  throw std::invalid_argument("bundle must be an integer bitmask or a bit string");
}

nlohmann::json allocation_to_json(const Allocation& a, const std::string& id, int p_item) {
  nlohmann::json j{{"bidder", id}, {"wins", a.wins}};
  if (a.wins) {
    j["bundle"] = bit_string(a.bundle, p_item);
    j["level"] = a.price_level;
  }
  return j;
}

}  // namespace

BidSuperposition bid_from_json(const nlohmann::json& j, const BidderRegister& reg, const std::string& bidder_id) {
  const nlohmann::json& terms = j.is_array() ? j : j.at("terms");
  if (!terms.is_array() || terms.empty()) throw std::invalid_argument("bid '" + bidder_id + "' needs a non-empty terms array");
  BidSuperposition bid{bidder_id, reg, {}};
  std::size_t with_amp = 0;
  for (const auto& t : terms) {
    if (!t.is_object()) throw std::invalid_argument("bid term must be an object");
    BidTerm term;
    term.bundle = bundle_from_json(t.at("bundle"));
    const long long level = t.at("level").get<long long>();
    if (level < 0) throw std::invalid_argument("price level must be non-negative");
    term.price_level = static_cast<std::uint32_t>(level);
    if (t.contains("amp")) {
      term.amplitude = core::complex_from_json(t["amp"]);
      ++with_amp;
    }
    bid.terms.push_back(term);
  }
  if (with_amp == 0) {
    const double a = 1.0 / std::sqrt(static_cast<double>(bid.terms.size()));
    for (auto& t : bid.terms) t.amplitude = a;
  } else if (with_amp != bid.terms.size()) {
    throw std::invalid_argument("bid '" + bidder_id + "': give 'amp' on every term or on none");
  }
  bid.validate();
  return bid;
}

nlohmann::json bid_to_json(const BidSuperposition& bid) {
  auto terms = nlohmann::json::array();
  for (const auto& t : bid.terms)
    terms.push_back({{"bundle", bit_string(t.bundle, bid.reg.p_item)},
                     {"level", t.price_level},
                     {"amp", core::complex_to_json(t.amplitude)}});
  return {{"id", bid.bidder_id}, {"terms", terms}};
}

nlohmann::json outcome_to_json(const Outcome& outcome, const std::vector<std::string>& bidder_ids, int p_item) {
  auto alloc = nlohmann::json::array();
  for (std::size_t k = 0; k < outcome.per_bidder.size(); ++k) {
    const std::string id = k < bidder_ids.size() ? bidder_ids[k] : std::to_string(k);
    alloc.push_back(allocation_to_json(outcome.per_bidder[k], id, p_item));
  }
  return {{"feasible", outcome.feasible}, {"revenue", outcome.revenue}, {"allocation", alloc}};
}

nlohmann::json stats_to_json(const AuctionStats& stats, const std::vector<std::string>& bidder_ids, int p_item) {
  auto outcomes = nlohmann::json::array();
  for (const auto& o : stats.outcomes) {
    auto j = outcome_to_json(o.outcome, bidder_ids, p_item);
    j["index"] = o.index;
    j["count"] = o.count;
    j["frequency"] = static_cast<double>(o.count) / stats.runs;
    outcomes.push_back(std::move(j));
  }
  auto sample = outcome_to_json(stats.first.outcome, bidder_ids, p_item);
  sample["index"] = stats.first.index;
  auto oracle = outcome_to_json(stats.oracle.outcome, bidder_ids, p_item);
  return {{"runs", stats.runs},
          {"success_rate", stats.success_rate},
          {"void_rate", stats.void_rate},
          {"mean_revenue", stats.mean_revenue},
          {"oracle", oracle},
          {"sample", sample},
          {"outcomes", outcomes}};
}

AuctionDocument auction_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("auction document must be a JSON object");
  AuctionDocument doc;
  const auto& r = j.at("register");
  BidderRegister reg{r.at("p_item").get<int>(), r.at("p_price").get<int>()};
  reg.validate();
  const auto& bidders = j.at("bidders");
  if (!bidders.is_array() || bidders.empty()) throw std::invalid_argument("auction needs a non-empty bidders array");
  const int n = static_cast<int>(bidders.size());
  const double tick = j.value("tick", 1.0);
  doc.instance = AuctionInstance{j.value("items", reg.p_item), reg, n, tick, 0.0};
  doc.instance.penalty = j.contains("penalty") ? j["penalty"].get<double>() : AuctionInstance::default_penalty(reg, n, tick);
  doc.instance.validate();
  std::set<std::string> ids;
  for (const auto& b : bidders) {
    const auto id = b.at("id").get<std::string>();
    if (!ids.insert(id).second) throw std::invalid_argument("duplicate bidder id '" + id + "'");
    doc.bids.push_back(bid_from_json(b, reg, id));
  }
  validate_bids(doc.bids, doc.instance);
  if (j.contains("search")) {
    const auto& s = j["search"];
    doc.search.steps = s.value("steps", doc.search.steps);
    doc.search.dt = s.value("dt", doc.search.dt);
    doc.search.seed = s.value("seed", doc.search.seed);
    doc.search.runs = s.value("runs", doc.search.runs);
  }
  doc.search.validate();
  return doc;
}

}  // namespace qauction::hp
