#include <doctest.h>

#include <cmath>
#include <set>

#include "qauction/hp/auction.hpp"
#include "qauction/rng.hpp"
#include "support/hp.hpp"

using namespace qauction;
using namespace qauction::hp;

namespace {

const double kHalf = 1.0 / std::sqrt(2.0);

}  // namespace

TEST_CASE("encode_term layout") {
  const BidderRegister r{2, 2};
  CHECK(encode_term({0, 0, 1.0}, r) == 0);
  CHECK(encode_term({0b10, 3, 1.0}, r) == 0b1011);
  CHECK_THROWS_AS(encode_term({0, 4, 1.0}, r), std::out_of_range);
  CHECK_THROWS_AS(encode_term({0b100, 0, 1.0}, r), std::out_of_range);
}

TEST_CASE("bid validation") {
  const BidderRegister r{2, 2};
  CHECK_NOTHROW((BidSuperposition{"a", r, {{1, 1, kHalf}, {2, 1, kHalf}}}.validate()));
  CHECK_THROWS_AS((BidSuperposition{"a", r, {}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BidSuperposition{"a", r, {{1, 1, kHalf}, {1, 1, kHalf}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BidSuperposition{"a", r, {{1, 1, 0.5}, {2, 1, 0.5}}}.validate()), std::invalid_argument);
  CHECK_NOTHROW((BidSuperposition{"a", r, {{1, 1, 1.0 + 2e-10}}}.validate()));
  CHECK_THROWS_AS((BidSuperposition{"a", r, {{1, 1, 1.0 + 1e-8}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(AuctionInstance::make(3, r, 2, 1.0), std::invalid_argument);
  auto inst = AuctionInstance::make(2, r, 2, 1.0);
  CHECK(inst.penalty == 9.0);
  inst.penalty = 8.0;
  CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
}

TEST_CASE("bidder_unitary") {
  SUBCASE("single term at the all-zeros index gives the identity") {
    const auto u = bidder_unitary({"a", {1, 1}, {{0, 0, 1.0}}});
    CHECK(u.to_dense() == Eigen::MatrixXcd::Identity(4, 4));
  }
  SUBCASE("column 0 equals the bid vector") {
    const BidSuperposition b{"a", {2, 2}, {{1, 3, kHalf}, {2, 1, kHalf}}};
    const auto u = bidder_unitary(b);
    CHECK(Eigen::VectorXcd(u.to_dense().col(0)) == b.vector().amplitudes());
  }
  SUBCASE("random seeded bids are unitary with the bid as column 0") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
      const int p_item = 1 + static_cast<int>(rng() % 3);
      const int p_price = 1 + static_cast<int>(rng() % 3);
      const auto b = testing::random_bid("r", {p_item, p_price}, 1 + static_cast<int>(rng() % 8), p_item, rng);
      const auto u = bidder_unitary(b).to_dense();
      const auto d = u.rows();
      CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(Eigen::VectorXcd(u.col(0)) == b.vector().amplitudes());
    }
  }
}

TEST_CASE("joint_initial is the product of bid vectors") {
  const BidderRegister r{2, 2};
  const BidSuperposition a{"a", r, {{1, 3, kHalf}, {2, 1, {0.0, kHalf}}}};
  const BidSuperposition b{"b", r, {{2, 2, 0.6}, {1, 1, 0.8}}};
  CHECK(joint_initial({a}) == a.vector());
  const auto psi = joint_initial({a, b});
  CHECK(psi.dim() == 256);
  const auto ia = encode_term(a.terms[1], r);
  const auto ib = encode_term(b.terms[0], r);
  CHECK(psi[ia * 16 + ib] == a.terms[1].amplitude * b.terms[0].amplitude);
  // Same state as the tensor of bidder unitaries applied to |0...0>.
  const auto via_u = core::apply_tensor_product({bidder_unitary(a), bidder_unitary(b)}, core::basis_state(256, 0));
  CHECK((via_u.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS((joint_initial({a, BidSuperposition{"c", {1, 3}, {{0, 1, 1.0}}}})), std::invalid_argument);
}

TEST_CASE("outcome_of_index and the problem hamiltonian") {
  const auto inst = AuctionInstance::make(2, {2, 2}, 2, 1.0);
  const auto disjoint = testing::joint_index(inst, {{0b01, 2}, {0b10, 1}});
  const auto overlap = testing::joint_index(inst, {{0b01, 2}, {0b01, 1}});
  auto o = outcome_of_index(disjoint, inst);
  CHECK(o.feasible);
  CHECK(o.revenue == 3.0);
  CHECK((o.per_bidder[0] == Allocation{true, 0b01, 2}));
  o = outcome_of_index(overlap, inst);
  CHECK_FALSE(o.feasible);
  CHECK(o.revenue == 0.0);
  o = outcome_of_index(0, inst);
  CHECK(o.feasible);
  CHECK(o.revenue == 0.0);
  CHECK_FALSE(o.per_bidder[0].wins);
  CHECK_THROWS_AS(outcome_of_index(256, inst), std::out_of_range);

  const auto h = problem_hamiltonian(inst);
  const auto& d = h.diagonal_entries();
  CHECK(h.is_hermitian());
  CHECK(d(disjoint).real() == -3.0);
  CHECK(d(overlap).real() == inst.penalty);
  CHECK(d(0).real() == 0.0);
  double worst_feasible = -1e300, best_infeasible = 1e300;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (outcome_of_index(i, inst).feasible)
      worst_feasible = std::max(worst_feasible, d(i).real());
    else
      best_infeasible = std::min(best_infeasible, d(i).real());
  }
  CHECK(best_infeasible > worst_feasible);
}

TEST_CASE("brute_force_wda") {
  SUBCASE("pinned instance") {
    const auto [inst, bids] = testing::pinned_instance();
    const auto r = brute_force_wda(bids, inst);
    CHECK(r.revenue == 5.0);
    CHECK(r.outcome.feasible);
    CHECK((r.outcome.per_bidder[0] == Allocation{true, 0b01, 3}));
    CHECK((r.outcome.per_bidder[1] == Allocation{true, 0b10, 2}));
    CHECK((r.choice == std::vector<std::size_t>{0, 0}));
  }
  SUBCASE("empty bundles only") {
    const BidderRegister reg{1, 1};
    const auto inst = AuctionInstance::make(1, reg, 2, 1.0);
    const std::vector<BidSuperposition> bids{{"a", reg, {{0, 0, 1.0}}}, {"b", reg, {{0, 0, 1.0}}}};
    CHECK(brute_force_wda(bids, inst).revenue == 0.0);
  }
  SUBCASE("same single item: higher price wins, ties go to the lexicographically first choice vector") {
    const BidderRegister reg{1, 2};
    const auto inst = AuctionInstance::make(1, reg, 2, 1.0);
    auto r = brute_force_wda({{"a", reg, {{1, 1, 1.0}}}, {"b", reg, {{1, 3, 1.0}}}}, inst);
    CHECK((r.choice == std::vector<std::size_t>{1, 0}));
    CHECK(r.revenue == 3.0);
    r = brute_force_wda({{"a", reg, {{1, 2, 1.0}}}, {"b", reg, {{1, 2, 1.0}}}}, inst);
    CHECK((r.choice == std::vector<std::size_t>{0, 1}));
    CHECK(r.outcome.per_bidder[0].wins);
    CHECK_FALSE(r.outcome.per_bidder[1].wins);
  }
  SUBCASE("agrees with an independent scan of the joint register") {
    Rng rng(2718);
    for (int trial = 0; trial < 60; ++trial) {
      const auto [inst, bids] = testing::random_instance(rng, 3, 3, 4);
      const auto r = brute_force_wda(bids, inst);
      CHECK(r.outcome.feasible);
      CHECK(r.revenue == doctest::Approx(testing::scan_best_revenue(bids, inst)).epsilon(1e-12));
    }
  }
  SUBCASE("enumeration bound") {
    const BidderRegister reg{1, 4};
    std::vector<BidSuperposition> bids;
    for (int k = 0; k < 7; ++k) {
      BidSuperposition b{"b" + std::to_string(k), reg, {}};
      for (std::uint32_t level = 0; level < 16; ++level) b.terms.push_back({1, level, 0.25});
      bids.push_back(b);
    }
    CHECK_THROWS_AS(brute_force_wda(bids, AuctionInstance::make(1, reg, 7, 1.0)), std::invalid_argument);
  }
}

TEST_CASE("adiabatic evolution matches a dense propagator") {
  Rng rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    const auto [inst, bids] = testing::random_instance(rng, 2, 3, 4);
    const int steps = 12;
    const double dt = trial < 2 ? 0.5 : 2.5;  // the larger step exercises sub-stepping
    const auto fast = adiabatic_evolve(bids, inst, steps, dt);
    const auto slow = testing::dense_adiabatic(bids, inst, steps, dt);
    CHECK((fast.amplitudes() - slow).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("adiabatic_search invariants") {
  SUBCASE("single bidder with one term is stationary") {
    const BidderRegister reg{2, 2};
    const auto inst = AuctionInstance::make(2, reg, 1, 1.0);
    const std::vector<BidSuperposition> bids{{"a", reg, {{0b11, 2, {0.0, 1.0}}}}};
    for (int steps : {1, 7, 50}) {
      const auto r = adiabatic_search(bids, inst, {steps, 0.3, 5, 1});
      CHECK(r.index == encode_term(bids[0].terms[0], reg));
      CHECK(r.final_state.probability(r.index) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("support preservation and norm drift") {
    Rng rng(77);
    for (int trial = 0; trial < 6; ++trial) {
      const auto [inst, bids] = testing::random_instance(rng, 3, 3, 4);
      const auto psi0 = joint_initial(bids);
      double outside = 0.0, drift = 0.0;
      auto watch = [&](int, const core::StateVector& psi) {
        double m = 0.0;
        for (Eigen::Index i = 0; i < psi.dim(); ++i)
          if (psi0[i] == 0.0) m += psi.probability(i);
        outside = std::max(outside, m);
        drift = std::max(drift, std::abs(psi.norm() - 1.0));
      };
      const auto r = adiabatic_search(bids, inst, {60, 0.7, 11, 1}, watch);
      CHECK(outside < 1e-12);
      CHECK(drift <= 1e-8);
      CHECK(std::abs(psi0[r.index]) > 0.0);
    }
  }
  SUBCASE("dimension guard") {
    const BidderRegister reg{3, 3};
    const auto inst = AuctionInstance::make(3, reg, 3, 1.0);
    std::vector<BidSuperposition> bids(3, BidSuperposition{"x", reg, {{1, 1, 1.0}}});
    CHECK_THROWS_AS(adiabatic_search(bids, inst, {}), std::invalid_argument);
  }
}

TEST_CASE("pinned instance: the search finds the optimum") {
  const auto [inst, bids] = testing::pinned_instance();
  const auto optimum = testing::joint_index(inst, {{0b01, 3}, {0b10, 2}});
  const auto slow = run_auction(bids, inst, {10, 0.5, 20240611, 200});
  const auto stats = run_auction(bids, inst, {200, 0.5, 20240611, 200});
  MESSAGE("P(optimum) at T=200: ", stats.first.final_state.probability(optimum), ", success ", stats.success_rate,
          "; at T=10: ", slow.first.final_state.probability(optimum), ", success ", slow.success_rate);
  CHECK(stats.success_rate >= 0.8);
  CHECK(stats.success_rate >= slow.success_rate);
  CHECK(stats.oracle.revenue == 5.0);
  // Frozen seeded fixture.
  CHECK(stats.success_rate == doctest::Approx(testing::kPinnedSuccessRate));
}

TEST_CASE("run_auction bookkeeping") {
  const auto [inst, bids] = testing::pinned_instance();
  const SearchConfig cfg{40, 0.5, 9, 1};
  const auto one = run_auction(bids, inst, cfg);
  const auto single = adiabatic_search(bids, inst, {40, 0.5, Rng(9).split_seed(0), 1});
  CHECK(one.first.index == single.index);
  CHECK(one.outcomes.size() == 1);

  const auto many = run_auction(bids, inst, {40, 0.5, 9, 300});
  std::size_t total = 0;
  for (const auto& o : many.outcomes) total += o.count;
  CHECK(total == 300);
  CHECK(many.success_rate >= 0.0);
  CHECK(many.success_rate <= 1.0);
  CHECK(many.void_rate + many.success_rate <= 1.0 + 1e-12);
  const auto again = run_auction(bids, inst, {40, 0.5, 9, 300});
  CHECK(again.success_rate == many.success_rate);
  CHECK(again.mean_revenue == many.mean_revenue);
  CHECK_THROWS_AS(run_auction(bids, inst, {40, 0.5, 9, 0}), std::invalid_argument);
}

TEST_CASE("json round trip") {
  const auto doc = auction_from_json(nlohmann::json::parse(R"({
    "register": {"p_item": 2, "p_price": 2}, "tick": 1,
    "bidders": [
      {"id": "A", "terms": [{"bundle": "01", "level": 3}, {"bundle": "10", "level": 1}]},
      {"id": "B", "terms": [{"bundle": 2, "level": 2, "amp": [0.6, 0]}, {"bundle": 1, "level": 1, "amp": 0.8}]}
    ],
    "search": {"steps": 50, "seed": 3}
  })"));
  CHECK(doc.instance.penalty == 9.0);
  CHECK(doc.bids[0].terms[0].amplitude.real() == doctest::Approx(kHalf));
  CHECK(doc.bids[0].terms[0].bundle == 1);
  CHECK(doc.search.steps == 50);
  CHECK(doc.search.dt == 0.5);
  const auto back = bid_from_json(bid_to_json(doc.bids[1]), doc.instance.reg, "B");
  CHECK(back.vector() == doc.bids[1].vector());
  const auto j = stats_to_json(run_auction(doc.bids, doc.instance, {20, 0.5, 1, 10}), {"A", "B"}, 2);
  CHECK(j.at("runs") == 10);
  CHECK(j.at("oracle").at("revenue") == 5.0);
  CHECK(j.at("oracle").at("allocation")[0].at("bundle") == "01");

  CHECK_THROWS_AS(auction_from_json(nlohmann::json::parse(R"({"register": {"p_item": 1, "p_price": 1},
    "bidders": [{"id": "A", "terms": [{"bundle": 1, "level": 1, "amp": 1}, {"bundle": 0, "level": 1}]}]})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(auction_from_json(nlohmann::json::parse(R"({"register": {"p_item": 1, "p_price": 1},
    "bidders": [{"id": "A", "terms": [{"bundle": 1, "level": 1}]}, {"id": "A", "terms": [{"bundle": 1, "level": 0}]}]})")),
                  std::invalid_argument);
}
