#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qauction/core/operator.hpp"
#include "qauction/core/state.hpp"

// Qubit-register combinatorial auction. Each bidder owns p = p_item + p_price
// qubits holding a superposition of (bundle, price level) bids; the joint
// state is the tensor product of the bidders' registers and an adiabatic
// search drives it towards the revenue-maximizing feasible allocation.
namespace qauction::hp {

using Complex = std::complex<double>;

struct BidderRegister {
  int p_item = 1;
  int p_price = 1;

  int bits() const { return p_item + p_price; }
  Eigen::Index dim() const { return Eigen::Index{1} << bits(); }
  void validate() const;
  friend bool operator==(const BidderRegister&, const BidderRegister&) = default;
};

struct BidTerm {
  std::uint32_t bundle = 0;  // bit i set = item i requested
  std::uint32_t price_level = 0;
  Complex amplitude{1.0, 0.0};
};

struct BidSuperposition {
  std::string bidder_id;
  BidderRegister reg;
  std::vector<BidTerm> terms;

  /// Non-empty, in-range, distinct terms with unit total weight.
  void validate(double norm_tolerance = 1e-9) const;
  /// sum_j alpha_j |encode(term_j)> on the bidder's 2^p basis.
  core::StateVector vector() const;
};

struct AuctionInstance {
  int items = 1;
  BidderRegister reg;
  int bidders = 1;
  double tick = 1.0;     // currency per price level
  double penalty = 0.0;  // energy of infeasible outcomes, W

  /// W = n 2^{p_price} tick + 1
  static double default_penalty(const BidderRegister& reg, int bidders, double tick);
  static AuctionInstance make(int items, BidderRegister reg, int bidders, double tick);
  void validate() const;
  int joint_bits() const { return reg.bits() * bidders; }
};

struct Allocation {
  bool wins = false;
  std::uint32_t bundle = 0;
  std::uint32_t price_level = 0;
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

struct Outcome {
  std::vector<Allocation> per_bidder;
  bool feasible = true;
  double revenue = 0.0;  // 0 when infeasible
};

struct SearchConfig {
  int steps = 200;
  double dt = 0.5;
  std::uint64_t seed = 0;
  int runs = 1;
  void validate() const;
};

/// Largest joint register handled by the simulator.
inline constexpr int kMaxJointBits = 16;

/// bundle * 2^{p_price} + price_level
Eigen::Index encode_term(const BidTerm& term, const BidderRegister& reg);

/// Unitary whose first column is the bid vector; remaining columns come from a Householder reflection.
core::Operator bidder_unitary(const BidSuperposition& bid);

/// Tensor product of the bid vectors, first bidder most significant.
core::StateVector joint_initial(const std::vector<BidSuperposition>& bids);

Outcome outcome_of_index(Eigen::Index index, const AuctionInstance& instance);

/// Diagonal energy: -revenue for feasible outcomes, +W otherwise.
core::Operator problem_hamiltonian(const AuctionInstance& instance);

/// Called after every schedule step with the step number (1..T) and the current state.
using StepObserver = std::function<void(int, const core::StateVector&)>;

/// Deterministic part of the search: psi <- exp(-i H(k/T) dt) psi for k = 1..T with
/// H(s) = (1 - s)(I - |psi0><psi0|) + s H_P / max|H_P|.
core::StateVector adiabatic_evolve(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance,
                                   int steps, double dt, const StepObserver& observer = {});

struct SearchResult {
  Eigen::Index index = 0;
  Outcome outcome;
  core::StateVector final_state = core::basis_state<double>(1, 0);
};

SearchResult adiabatic_search(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance,
                              const SearchConfig& config, const StepObserver& observer = {});

struct OracleResult {
  Outcome outcome;
  double revenue = 0.0;
  /// Per bidder: index of the winning term, or terms.size() for no-win.
  std::vector<std::size_t> choice;
};

/// Exhaustive winner determination over every bidder's terms plus no-win.
OracleResult brute_force_wda(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance);

struct OutcomeStats {
  Eigen::Index index = 0;
  std::size_t count = 0;
  Outcome outcome;
};

struct AuctionStats {
  int runs = 0;
  std::vector<OutcomeStats> outcomes;  // sorted by joint index
  double success_rate = 0.0;
  double void_rate = 0.0;
  double mean_revenue = 0.0;  // voided runs count as zero
  OracleResult oracle;
  SearchResult first;  // run 0
};

/// Repeats the search; run r measures with seed Rng(config.seed).split_seed(r).
AuctionStats run_auction(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance,
                         const SearchConfig& config);

/// Checks every bid against the instance's register, item count and bidder count.
void validate_bids(const std::vector<BidSuperposition>& bids, const AuctionInstance& instance);

BidSuperposition bid_from_json(const nlohmann::json& j, const BidderRegister& reg, const std::string& bidder_id);
nlohmann::json bid_to_json(const BidSuperposition& bid);
/// Bundles are written as p_item-wide bit strings, item 0 rightmost.
nlohmann::json outcome_to_json(const Outcome& outcome, const std::vector<std::string>& bidder_ids, int p_item);
nlohmann::json stats_to_json(const AuctionStats& stats, const std::vector<std::string>& bidder_ids, int p_item);

struct AuctionDocument {
  AuctionInstance instance;
  std::vector<BidSuperposition> bids;
  SearchConfig search;
};

/// {register: {p_item, p_price}, tick, items?, penalty?, bidders: [{id, terms: [...]}], search?: {...}}
AuctionDocument auction_from_json(const nlohmann::json& j);

}  // namespace qauction::hp
