#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "qauction/rng.hpp"
#include "qauction/service/session.hpp"
#include "qauction/service/store.hpp"
#include "support/service.hpp"

using namespace qauction;
using namespace qauction::service;
using qauction::testing::CountingClock;
using qauction::testing::TempDir;

namespace {

const json kHpSpec = json::parse(R"({"model": "hp", "title": "two lots"})");

Session configured_hp(const json& config = testing::pinned_hp_config()) {
  CountingClock clock;
  Session s = Session::create("s1", kHpSpec, clock());
  s.configure(config, clock());
  return s;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines, bool torn_tail = false) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out << lines[i];
    if (!(torn_tail && i + 1 == lines.size())) out << '\n';
  }
}

ServiceError error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e;
  }
  FAIL("expected a ServiceError");
  return {"", 0, ""};
}

}  // namespace

TEST_CASE("create validates the spec") {
  CHECK(Session::create("x", kHpSpec, "t").phase() == Phase::Announced);
  CHECK(error_of([] { Session::create("x", json::parse(R"({"model": "quantum"})"), "t"); }).code() == "validation");
  CHECK(error_of([] { Session::create("x", json::array(), "t"); }).code() == "validation");

  TempDir dir("create");
  SessionStore store(dir.path(), CountingClock{});
  const auto a = store.create(kHpSpec);
  const auto b = store.create(kHpSpec);
  CHECK(a != b);
  CHECK_THROWS_AS(store.create(json::parse(R"({"title": "no model"})")), ServiceError);
  std::size_t journals = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir.path())) journals += f.path().extension() == ".jsonl";
  CHECK(journals == 2);
}

TEST_CASE("configure") {
  CountingClock clock;
  Session s = Session::create("s", kHpSpec, clock());
  auto bad = testing::pinned_hp_config();
  bad["penalty"] = 8.0;  // 2^2 * 1 * 2 = 8 is not dominated
  CHECK(error_of([&] { s.configure(bad, clock()); }).code() == "validation");
  CHECK(s.phase() == Phase::Announced);
  const auto& e = s.configure(testing::pinned_hp_config(), clock());
  CHECK(e.kind == "configured");
  CHECK(e.payload["penalty"] == 9.0);
  CHECK(s.phase() == Phase::Bidding);
  CHECK(error_of([&] { s.configure(testing::pinned_hp_config(), clock()); }).code() == "wrong_phase");

  auto reserved = testing::pinned_hp_config();
  reserved["bidders"] = {"A", "auctioneer"};
  CHECK(error_of([&] { configured_hp(reserved); }).code() == "validation");
  auto wide = testing::pinned_hp_config();
  wide["register"] = {{"p_item", 4}, {"p_price", 4}};
  wide["bidders"] = {"A", "B", "C"};
  CHECK(error_of([&] { configured_hp(wide); }).code() == "validation");
}

TEST_CASE("bids") {
  Session s = configured_hp();
  CHECK(s.submit_bid("A", testing::pinned_hp_bid("A"), "t").kind == "bid_submitted");
  CHECK(error_of([&] { s.submit_bid("Z", testing::pinned_hp_bid("A"), "t"); }).code() == "unknown_bidder");

  json loose = json::parse(R"({"terms": [{"bundle": 1, "level": 1, "amp": 0.7}, {"bundle": 2, "level": 1, "amp": 0.7}]})");
  CHECK(error_of([&] { s.submit_bid("B", loose, "t"); }).code() == "validation");
  // |a|^2 = 1 + 6e-10 is inside the 1e-9 normalization tolerance.
  json close = json::parse(R"({"terms": [{"bundle": 1, "level": 1, "amp": 1.0000000003}]})");
  CHECK_NOTHROW(s.submit_bid("B", close, "t"));

  const auto before = s.events().size();
  s.submit_bid("B", testing::pinned_hp_bid("B"), "t");
  CHECK(s.events().size() == before + 1);
  CHECK(s.bids().at("B")["terms"][0]["bundle"] == "10");
  CHECK(s.events()[before - 1].payload["bid"]["terms"][0]["amp"][0] == 1.0000000003);

  s.start_search(1, "t");
  CHECK(error_of([&] { s.submit_bid("A", testing::pinned_hp_bid("A"), "t"); }).code() == "wrong_phase");
}

TEST_CASE("search settles hp sessions") {
  SUBCASE("single bidder single term") {
    auto cfg = testing::pinned_hp_config();
    cfg["bidders"] = {"solo"};
    Session s = configured_hp(cfg);
    s.submit_bid("solo", json::parse(R"({"terms": [{"bundle": "11", "level": 2}]})"), "t");
    s.start_search(3, "t");
    CHECK(s.phase() == Phase::Searching);
    s.finish_search("t");
    CHECK(s.phase() == Phase::Settled);
    CHECK((*s.result())["settlement"]["settled_revenue"] == 2.0);
    CHECK((*s.result())["settlement"]["winners"] == json::array({"solo"}));
    CHECK(s.view("solo")["own_outcome"]["bundle"] == "11");
  }
  SUBCASE("pinned fixture is oracle optimal at high frequency") {
    Session s = configured_hp();
    s.submit_bid("A", testing::pinned_hp_bid("A"), "t");
    s.submit_bid("B", testing::pinned_hp_bid("B"), "t");
    s.start_search(20240611, "t");
    s.finish_search("t");
    const auto& stats = (*s.result())["stats"];
    CHECK(stats["oracle"]["revenue"] == 5.0);
    CHECK(stats["success_rate"].get<double>() >= 0.8);
    CHECK(error_of([&] { s.start_search(1, "t"); }).code() == "wrong_phase");
  }
  SUBCASE("search needs a bid") {
    Session s = configured_hp();
    CHECK(error_of([&] { s.start_search(1, "t"); }).code() == "validation");
    CHECK(error_of([&] { Session::create("x", kHpSpec, "t").start_search(1, "t"); }).code() == "wrong_phase");
  }
}

TEST_CASE("ps and gg sessions") {
  SUBCASE("ps") {
    CountingClock clock;
    Session s = Session::create("p", json{{"model", "ps"}}, clock());
    s.configure(json::parse(R"({"grid": {"qmin": -8, "qmax": 8, "n": 1024}, "bidders": ["buyer", "seller"]})"), clock());
    s.submit_bid("buyer", json::parse(R"({"side": "buyer", "gaussian": {"mean": 0.5, "std": 0.3}})"), clock());
    s.submit_bid("seller", json::parse(R"({"side": "seller", "gaussian": {"mean": 0.5, "std": 0.3}})"), clock());
    CHECK(error_of([&] { s.submit_bid("seller", json::parse(R"({"side": "seller"})"), clock()); }).code() == "validation");
    s.start_search(8, clock());
    s.finish_search(clock());
    CHECK(s.phase() == Phase::Settled);
    const auto& report = (*s.result())["report"];
    double flows = 0.0;
    for (const auto& f : report["flows"]) flows += f["flow"].get<double>();
    CHECK(flows == 0.0);
    const auto v = s.view("buyer");
    CHECK(v["own_outcome"].contains("sampled_coordinate"));
    CHECK(testing::redaction_violation(v, {"seller"}) == "");
    CHECK(Session::replay(s.events()).state_json().dump() == s.state_json().dump());
  }
  SUBCASE("gg takes no bids") {
    CountingClock clock;
    Session s = Session::create("g", json{{"model", "gg"}}, clock());
    s.configure(json::parse(R"({"n_max": 16, "rounds": 64, "tau": 1, "beta": [0.6, 0.6], "gamma": [0.8, -0.8],
                                "lambda": 0.05, "p0": 100, "reset_each_round": true})"),
                clock());
    CHECK(error_of([&] { s.submit_bid("x", json::object(), clock()); }).code() == "validation");
    CHECK(error_of([&] { s.view("x"); }).code() == "forbidden");
    s.start_search(42, clock());
    s.finish_search(clock());
    CHECK(s.phase() == Phase::Settled);
    CHECK((*s.result())["series"]["log_prices"].size() == 65);
  }
}

TEST_CASE("views are redacted") {
  auto cfg = testing::pinned_hp_config();
  cfg["bidders"] = {"alpha", "bravo", "charlie"};
  cfg["search"]["steps"] = 30;
  Session s = configured_hp(cfg);
  const std::vector<std::string> ids{"alpha", "bravo", "charlie"};
  const std::map<std::string, json> bids{
      {"alpha", json::parse(R"({"terms": [{"bundle": "01", "level": 3}, {"bundle": "10", "level": 1}]})")},
      {"bravo", json::parse(R"({"terms": [{"bundle": "10", "level": 2}]})")},
      {"charlie", json::parse(R"({"terms": [{"bundle": "11", "level": 1, "amp": [0, 1]}]})")}};

  auto scan = [&] {
    for (const auto& id : ids) {
      std::vector<std::string> others;
      for (const auto& o : ids)
        if (o != id) others.push_back(o);
      const auto v = s.view(id);
      CHECK_MESSAGE(testing::redaction_violation(v, others) == "", id, " in ", to_string(s.phase()));
    }
    const auto pub = s.view(kPublic);
    CHECK_FALSE(pub.contains("bids"));
    CHECK_FALSE(pub.contains("result"));
    CHECK_FALSE(pub.contains("config"));
  };

  scan();
  for (const auto& [id, bid] : bids) {
    s.submit_bid(id, bid, "t");
    scan();
    const auto a = s.view(kAuctioneer);
    CHECK_FALSE(a.contains("bids"));
    CHECK(a["bid_count"] == s.bids().size());
  }
  CHECK(s.view("bravo")["own_bid"] == s.bids().at("bravo"));
  s.start_search(5, "t");
  s.finish_search("t");
  scan();
  const auto a = s.view(kAuctioneer);
  CHECK(a["bids"].size() == 3);
  CHECK(a.contains("result"));
  if (s.phase() == Phase::Settled) CHECK(s.view(kPublic).contains("settled_revenue"));
  CHECK(error_of([&] { s.view("mallory"); }).code() == "forbidden");
}

TEST_CASE("random operation sequences never make an illegal transition") {
  // Phase changes a single operation may cause, stated independently of the implementation.
  const std::set<std::pair<Phase, Phase>> allowed{{Phase::Announced, Phase::Bidding},
                                                  {Phase::Bidding, Phase::Searching},
                                                  {Phase::Searching, Phase::Settled},
                                                  {Phase::Searching, Phase::Void}};
  auto cfg = testing::pinned_hp_config();
  cfg["search"] = {{"steps", 8}, {"dt", 0.5}, {"runs", 4}};
  const std::vector<json> configs{cfg, cfg, json::parse(R"({"register": {"p_item": 0, "p_price": 2}, "bidders": ["A"]})"),
                                  json::parse("[]")};
  const std::vector<json> payloads{testing::pinned_hp_bid("A"), testing::pinned_hp_bid("B"),
                                   json::parse(R"({"terms": [{"bundle": "11", "level": 3}]})"),
                                   json::parse(R"({"terms": [{"bundle": "01", "level": 9}]})"), json::parse("{}")};
  const std::vector<std::string> who{"A", "B", "C", "auctioneer"};

  Rng rng(4242);
  std::size_t accepted = 0, rejected = 0, settled_or_void = 0;
  for (int session = 0; session < 60; ++session) {
    Session s = Session::create("r" + std::to_string(session), kHpSpec, "t0");
    for (int op = 0; op < 24; ++op) {
      const std::string before = s.state_json().dump();
      const Phase from = s.phase();
      try {
        switch (rng() % 7) {
          case 0: s.configure(configs[rng() % configs.size()], "t"); break;
          case 1:
          case 2: s.submit_bid(who[rng() % who.size()], payloads[rng() % payloads.size()], "t"); break;
          case 3: s.start_search(rng() % 1000, "t"); break;
          case 4:
          case 5: s.finish_search("t"); break;
          default: s.view(who[rng() % who.size()]); break;
        }
        ++accepted;
        const Phase to = s.phase();
        CHECK((from == to || allowed.count({from, to}) == 1));
      } catch (const ServiceError&) {
        ++rejected;
        CHECK(s.state_json().dump() == before);
      }
      for (std::size_t i = 0; i < s.events().size(); ++i) CHECK(s.events()[i].seq == i + 1);
      CHECK(s.result().has_value() == (s.phase() == Phase::Settled || s.phase() == Phase::Void));
    }
    settled_or_void += s.result().has_value();
    CHECK(Session::replay(s.events()).state_json().dump() == s.state_json().dump());
  }
  MESSAGE("accepted ", accepted, ", rejected ", rejected, ", finished sessions ", settled_or_void);
  CHECK(accepted > 100);
  CHECK(rejected > 100);
  CHECK(settled_or_void > 5);
}

TEST_CASE("store journal and replay") {
  TempDir dir("replay");
  std::string id;
  std::string live;
  {
    SessionStore store(dir.path(), CountingClock{});
    id = store.create(kHpSpec);
    store.configure(id, testing::pinned_hp_config());
    store.submit_bid(id, "A", testing::pinned_hp_bid("B"));
    store.submit_bid(id, "A", testing::pinned_hp_bid("A"));  // replaces the first bid
    store.submit_bid(id, "B", testing::pinned_hp_bid("B"));
    const auto ack = store.search(id, 77);
    CHECK(ack["phase"] == "Settled");
    live = store.snapshot(id).state_json().dump();
    CHECK(store.events(id, kAuctioneer)["events"].size() == 7);
    CHECK_THROWS_AS(store.events(id, "A"), ServiceError);
    CHECK_THROWS_AS(store.view("missing", kPublic), ServiceError);
  }
  const auto path = dir.path() / (id + ".jsonl");
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 7);

  SUBCASE("full journal reproduces the session byte for byte") {
    SessionStore again(dir.path(), CountingClock{});
    CHECK(again.recovery_errors().empty());
    CHECK(again.snapshot(id).state_json().dump() == live);
    const auto events = read_journal(path);
    CHECK(Session::replay(events).state_json().dump() == Session::replay(events).state_json().dump());
  }
  SUBCASE("truncated journal stops at the last consistent phase") {
    write_lines(path, {lines.begin(), lines.begin() + 3});
    CHECK(Session::replay(read_journal(path)).phase() == Phase::Bidding);
    CHECK(Session::replay(read_journal(path)).bids().at("A") == json::parse(lines[2])["payload"]["bid"]);
  }
  SUBCASE("torn last line is ignored") {
    auto torn = lines;
    torn[6] = torn[6].substr(0, torn[6].size() / 2);
    write_lines(path, torn, true);
    CHECK(read_journal(path).size() == 6);
    // The store completes the interrupted search from the journaled seed.
    SessionStore again(dir.path(), CountingClock{});
    CHECK(again.recovery_errors().empty());
    const auto s = again.snapshot(id);
    CHECK(s.phase() == Phase::Settled);
    CHECK(s.result()->dump() == json::parse(lines[6])["payload"].dump());
  }
  SUBCASE("tampered seq") {
    auto bad = lines;
    auto e = json::parse(bad[3]);
    e["seq"] = 9;
    bad[3] = e.dump();
    write_lines(path, bad);
    CHECK(error_of([&] { Session::replay(read_journal(path)); }).code() == "integrity");
    SessionStore again(dir.path(), CountingClock{});
    CHECK(again.recovery_errors().count(id) == 1);
  }
  SUBCASE("gap") {
    auto bad = lines;
    bad.erase(bad.begin() + 2);
    write_lines(path, bad);
    CHECK(error_of([&] { Session::replay(read_journal(path)); }).code() == "integrity");
  }
  SUBCASE("corrupt middle line") {
    auto bad = lines;
    bad[2] = "{\"seq\": 3, \"kind\": ";
    write_lines(path, bad);
    CHECK(error_of([&] { read_journal(path); }).code() == "integrity");
  }
  SUBCASE("tampered result") {
    auto bad = lines;
    auto e = json::parse(bad[6]);
    e["payload"]["settlement"]["settled_revenue"] = 1000.0;
    bad[6] = e.dump();
    write_lines(path, bad);
    CHECK(error_of([&] { Session::replay(read_journal(path)); }).code() == "integrity");
  }
  SUBCASE("tampered bid") {
    auto bad = lines;
    auto e = json::parse(bad[4]);
    e["payload"]["bid"]["terms"][0]["amp"] = {2.0, 0.0};
    bad[4] = e.dump();
    write_lines(path, bad);
    CHECK(error_of([&] { Session::replay(read_journal(path)); }).code() == "integrity");
  }
}

TEST_CASE("failed commands leave the journal untouched") {
  TempDir dir("atomic");
  SessionStore store(dir.path(), CountingClock{});
  const auto id = store.create(kHpSpec);
  const auto path = dir.path() / (id + ".jsonl");
  CHECK_THROWS_AS(store.search(id, 1), ServiceError);
  CHECK_THROWS_AS(store.configure(id, json::parse(R"({"bidders": []})")), ServiceError);
  CHECK(read_lines(path).size() == 1);
  store.configure(id, testing::pinned_hp_config());
  CHECK_THROWS_AS(store.submit_bid(id, "A", json::parse(R"({"terms": []})")), ServiceError);
  CHECK(read_lines(path).size() == 2);
}

TEST_CASE("concurrent sessions and readers") {
  TempDir dir("concurrent");
  SessionStore store(dir.path());
  auto cfg = testing::pinned_hp_config();
  cfg["search"] = {{"steps", 20}, {"dt", 0.5}, {"runs", 10}};
  std::vector<std::string> ids;
  for (int k = 0; k < 4; ++k) {
    ids.push_back(store.create(kHpSpec));
    store.configure(ids.back(), cfg);
  }
  std::atomic<int> failures{0};
  std::vector<std::thread> workers;
  for (const auto& id : ids) {
    workers.emplace_back([&, id] {
      try {
        // Both bidders race to submit; afterwards the auctioneer searches.
        std::thread b([&] { store.submit_bid(id, "B", testing::pinned_hp_bid("B")); });
        store.submit_bid(id, "A", testing::pinned_hp_bid("A"));
        b.join();
        store.search(id, 3);
      } catch (...) {
        ++failures;
      }
    });
    workers.emplace_back([&, id] {
      for (int i = 0; i < 50; ++i) {
        try {
          const auto v = store.view(id, "A");
          if (testing::redaction_violation(v, {"B"}) != "") ++failures;
        } catch (...) {
          ++failures;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  CHECK(failures == 0);
  SessionStore again(dir.path());
  for (const auto& id : ids) {
    const auto s = store.snapshot(id);
    CHECK(s.events().size() == 6);
    CHECK(again.snapshot(id).state_json().dump() == s.state_json().dump());
  }
}
