#include "qauction/service/session.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "qauction/gg/market.hpp"
#include "qauction/hp/auction.hpp"
#include "qauction/ps/exchange.hpp"

namespace qauction::service {

namespace {

constexpr std::array<const char*, 6> kPhaseNames{"Announced", "Configured", "Bidding", "Searching", "Settled", "Void"};

// Runs a validation step and reports any module error as a validation ServiceError.
template <class F>
auto validated(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ServiceError&) {
    throw;
  } catch (const json::exception& e) {
    throw validation_error(e.what());
  } catch (const std::invalid_argument& e) {
    throw validation_error(e.what());
  } catch (const std::out_of_range& e) {
    throw validation_error(e.what());
  } catch (const std::domain_error& e) {
    throw validation_error(e.what());
  }
}

std::vector<std::string> parse_allowlist(const json& c) {
  if (!c.contains("bidders") || !c["bidders"].is_array() || c["bidders"].empty())
    throw validation_error("config needs a non-empty 'bidders' array of bidder ids");
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& b : c["bidders"]) {
    if (!b.is_string() || b.get<std::string>().empty()) throw validation_error("bidder ids must be non-empty strings");
    const auto id = b.get<std::string>();
    if (id == kAuctioneer || id == kPublic) throw validation_error("'" + id + "' is a reserved viewer name");
    if (!seen.insert(id).second) throw validation_error("duplicate bidder id '" + id + "'");
    ids.push_back(id);
  }
  return ids;
}

// hp: {register, items?, tick?, penalty?, bidders, search?: {steps, dt, runs}}
json hp_config(const json& c) {
  const auto ids = parse_allowlist(c);
  const auto& r = c.at("register");
  const hp::BidderRegister reg{r.at("p_item").get<int>(), r.at("p_price").get<int>()};
  reg.validate();
  const int n = static_cast<int>(ids.size());
  const double tick = c.value("tick", 1.0);
  hp::AuctionInstance inst{c.value("items", reg.p_item), reg, n, tick,
                           c.contains("penalty") ? c["penalty"].get<double>()
                                                 : hp::AuctionInstance::default_penalty(reg, n, tick)};
  inst.validate();
  if (inst.joint_bits() > hp::kMaxJointBits)
    throw validation_error("joint register of " + std::to_string(inst.joint_bits()) + " qubits exceeds the " +
                           std::to_string(hp::kMaxJointBits) + "-qubit limit");
  hp::SearchConfig s;
  if (c.contains("search")) {
    const auto& sj = c["search"];
    s.steps = sj.value("steps", s.steps);
    s.dt = sj.value("dt", s.dt);
    s.runs = sj.value("runs", s.runs);
  }
  s.validate();
  return {{"register", {{"p_item", reg.p_item}, {"p_price", reg.p_price}}},
          {"items", inst.items},
          {"tick", inst.tick},
          {"penalty", inst.penalty},
          {"bidders", ids},
          {"search", {{"steps", s.steps}, {"dt", s.dt}, {"runs", s.runs}}}};
}

hp::AuctionInstance hp_instance(const json& c) {
  const hp::BidderRegister reg{c["register"]["p_item"].get<int>(), c["register"]["p_price"].get<int>()};
  return {c["items"].get<int>(), reg, static_cast<int>(c["bidders"].size()), c["tick"].get<double>(),
          c["penalty"].get<double>()};
}

hp::BidSuperposition hp_bid(const json& c, const std::string& id, const json& payload) {
  const auto inst = hp_instance(c);
  auto bid = hp::bid_from_json(payload, inst.reg, id);
  for (const auto& t : bid.terms)
    if (t.bundle >> inst.items) throw validation_error("bid requests an item beyond the " + std::to_string(inst.items) + " on sale");
  return bid;
}

// ps: {grid?: {qmin, qmax, n}, risk?: {m, theta}, bidders}
json ps_config(const json& c) {
  const auto ids = parse_allowlist(c);
  ps::LogPriceGrid grid;
  if (c.contains("grid")) {
    grid.q_min = c["grid"].value("qmin", grid.q_min);
    grid.q_max = c["grid"].value("qmax", grid.q_max);
    grid.n = c["grid"].value("n", grid.n);
  }
  grid.validate();
  ps::RiskParams risk;
  if (c.contains("risk")) {
    risk.m = c["risk"].value("m", risk.m);
    risk.theta = c["risk"].value("theta", risk.theta);
  }
  risk.validate();
  return {{"grid", {{"qmin", grid.q_min}, {"qmax", grid.q_max}, {"n", grid.n}}},
          {"risk", {{"m", risk.m}, {"theta", risk.theta}}},
          {"bidders", ids}};
}

ps::LogPriceGrid ps_grid(const json& c) {
  return {c["grid"]["qmin"].get<double>(), c["grid"]["qmax"].get<double>(), c["grid"]["n"].get<int>()};
}

ps::TraderStrategy ps_trader(const json& c, const std::string& id, const json& payload) {
  if (!payload.is_object()) throw validation_error("trader bid must be a JSON object");
  json j = payload;
  j["id"] = id;
  return ps::trader_from_json(j, ps_grid(c));
}

json settlement(double revenue, std::vector<std::string> winners) {
  return {{"settled_revenue", revenue}, {"winners", std::move(winners)}};
}

json run_model(Model model, const json& config, const std::map<std::string, json>& bids, std::uint64_t seed) {
  json result{{"model", to_string(model)}, {"seed", seed}};
  switch (model) {
    case Model::Hp: {
      const auto inst = hp_instance(config);
      const auto ids = config["bidders"].get<std::vector<std::string>>();
      std::vector<hp::BidSuperposition> sups;
      for (const auto& id : ids) {
        const auto it = bids.find(id);
        // A bidder who never bid abstains: the all-zeros register with certainty.
        sups.push_back(it == bids.end() ? hp::BidSuperposition{id, inst.reg, {{0, 0, 1.0}}}
                                        : hp_bid(config, id, it->second));
      }
      const auto& s = config["search"];
      const hp::SearchConfig cfg{s["steps"].get<int>(), s["dt"].get<double>(), seed, s["runs"].get<int>()};
      const auto stats = hp::run_auction(sups, inst, cfg);
      auto outcome = hp::outcome_to_json(stats.first.outcome, ids, inst.reg.p_item);
      outcome["index"] = stats.first.index;
      std::vector<std::string> winners;
      for (std::size_t k = 0; k < ids.size(); ++k)
        if (stats.first.outcome.per_bidder[k].wins) winners.push_back(ids[k]);
      const bool feasible = stats.first.outcome.feasible;
      result["status"] = feasible ? "settled" : "void";
      result["outcome"] = outcome;
      result["stats"] = hp::stats_to_json(stats, ids, inst.reg.p_item);
      result["settlement"] = settlement(feasible ? stats.first.outcome.revenue : 0.0, feasible ? winners : std::vector<std::string>{});
      break;
    }
    case Model::Ps: {
      const auto ids = config["bidders"].get<std::vector<std::string>>();
      std::vector<ps::TraderStrategy> traders;
      for (const auto& id : ids)
        if (const auto it = bids.find(id); it != bids.end()) traders.push_back(ps_trader(config, id, it->second));
      ps::RiskParams risk{config["risk"]["m"].get<double>(), config["risk"]["theta"].get<double>()};
      const auto report = ps::market_round(traders, risk, seed);
      double revenue = 0.0;
      std::vector<std::string> winners;
      for (const auto& t : report.outcome.trades) {
        revenue += t.price;
        winners.push_back(t.buyer);
        winners.push_back(t.seller);
      }
      result["status"] = "settled";
      result["report"] = ps::report_to_json(report);
      result["settlement"] = settlement(revenue, winners);
      break;
    }
    case Model::Gg: {
      auto cfg = gg::config_from_json(config);
      cfg.seed = seed;
      result["status"] = "settled";
      result["series"] = gg::series_to_json(gg::run_market(cfg));
      result["settlement"] = settlement(0.0, {});
      break;
    }
  }
  return result;
}

// The part of a result that concerns one bidder.
json own_outcome(Model model, const json& result, const std::string& id) {
  if (model == Model::Hp) {
    for (const auto& a : result["outcome"]["allocation"])
      if (a["bidder"] == id) return a;
    return nullptr;
  }
  const auto& r = result["report"];
  json out{{"price", r["price"]}, {"traded", false}};
  if (r["collapsed"].contains(id)) out["sampled_coordinate"] = r["collapsed"][id];
  for (const auto& f : r["flows"])
    if (f["id"] == id) {
      out["traded"] = true;
      out["flow"] = f["flow"];
    }
  return out;
}

}  // namespace

const char* to_string(Phase phase) { return kPhaseNames[static_cast<std::size_t>(phase)]; }

Phase phase_from_string(const std::string& text) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i)
    if (text == kPhaseNames[i]) return static_cast<Phase>(i);
  throw std::invalid_argument("unknown phase '" + text + "'");
}

bool legal_transition(Phase from, Phase to) {
  if (from == to) return true;
  switch (from) {
    case Phase::Announced: return to == Phase::Configured;
    case Phase::Configured: return to == Phase::Bidding;
    case Phase::Bidding: return to == Phase::Searching;
    case Phase::Searching: return to == Phase::Settled || to == Phase::Void;
    default: return false;
  }
}

const char* to_string(Model model) {
  switch (model) {
    case Model::Hp: return "hp";
    case Model::Ps: return "ps";
    case Model::Gg: return "gg";
  }
  return "?";
}

Model model_from_string(const std::string& text) {
  if (text == "hp") return Model::Hp;
  if (text == "ps") return Model::Ps;
  if (text == "gg") return Model::Gg;
  throw std::invalid_argument("unknown model '" + text + "' (expected hp, ps or gg)");
}

ServiceError validation_error(const std::string& message) { return {"validation", 400, message}; }

ServiceError wrong_phase(const std::string& operation, Phase phase) {
  return {"wrong_phase", 409, operation + " is not allowed in phase " + to_string(phase)};
}

ServiceError not_found(const std::string& what) { return {"not_found", 404, what + " not found"}; }
ServiceError forbidden(const std::string& message) { return {"forbidden", 403, message}; }
ServiceError integrity_error(const std::string& message) { return {"integrity", 500, message}; }

json event_to_json(const Event& e) {
  return {{"seq", e.seq}, {"timestamp", e.timestamp}, {"kind", e.kind}, {"payload", e.payload}};
}

Event event_from_json(const json& j) {
  return validated([&] {
    return Event{j.at("seq").get<std::uint64_t>(), j.at("timestamp").get<std::string>(), j.at("kind").get<std::string>(),
                 j.at("payload")};
  });
}

const Event& Session::append(std::string kind, json payload, const std::string& timestamp) {
  events_.push_back({events_.size() + 1, timestamp, std::move(kind), std::move(payload)});
  return events_.back();
}

Session Session::create(const std::string& id, const json& spec, const std::string& timestamp) {
  if (id.empty()) throw validation_error("session id must not be empty");
  Session s;
  s.model_ = validated([&] {
    if (!spec.is_object()) throw validation_error("session spec must be a JSON object");
    return model_from_string(spec.at("model").get<std::string>());
  });
  s.id_ = id;
  s.spec_ = spec;
  s.append("created", {{"id", id}, {"spec", spec}}, timestamp);
  return s;
}

const Event& Session::configure(const json& config, const std::string& timestamp) {
  if (phase_ != Phase::Announced) throw wrong_phase("configure", phase_);
  json canonical = validated([&]() -> json {
    if (!config.is_object()) throw validation_error("config must be a JSON object");
    switch (model_) {
      case Model::Hp: return hp_config(config);
      case Model::Ps: return ps_config(config);
      case Model::Gg: {
        json c = gg::config_to_json(gg::config_from_json(config));
        c.erase("seed");  // the search call supplies the seed
        return c;
      }
    }
    return nullptr;
  });
  config_ = canonical;
  // Configured is transient: bidding opens as soon as the config is frozen.
  phase_ = Phase::Configured;
  phase_ = Phase::Bidding;
  return append("configured", std::move(canonical), timestamp);
}

std::vector<std::string> Session::allowlist() const {
  if (!config_.is_object() || !config_.contains("bidders")) return {};
  return config_["bidders"].get<std::vector<std::string>>();
}

bool Session::is_bidder(const std::string& id) const {
  const auto ids = allowlist();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

const Event& Session::submit_bid(const std::string& bidder_id, const json& bid, const std::string& timestamp) {
  if (phase_ != Phase::Bidding) throw wrong_phase("submit_bid", phase_);
  if (model_ == Model::Gg) throw validation_error("gg sessions take no bids");
  if (!is_bidder(bidder_id)) throw ServiceError("unknown_bidder", 403, "'" + bidder_id + "' is not a bidder in this session");
  json canonical = validated([&]() -> json {
    if (model_ == Model::Hp) {
      auto j = hp::bid_to_json(hp_bid(config_, bidder_id, bid));
      j.erase("id");
      return j;
    }
    ps_trader(config_, bidder_id, bid);
    json j = bid;
    j.erase("id");
    return j;
  });
  bids_[bidder_id] = canonical;
  return append("bid_submitted", {{"bidder_id", bidder_id}, {"bid", std::move(canonical)}}, timestamp);
}

const Event& Session::start_search(std::uint64_t seed, const std::string& timestamp) {
  if (phase_ != Phase::Bidding) throw wrong_phase("search", phase_);
  if (model_ != Model::Gg && bids_.empty()) throw validation_error("search needs at least one bid");
  seed_ = seed;
  phase_ = Phase::Searching;
  return append("search_started", {{"seed", seed}}, timestamp);
}

const Event& Session::finish_search(const std::string& timestamp) {
  if (phase_ != Phase::Searching || !seed_) throw wrong_phase("finish_search", phase_);
  json result = run_model(model_, config_, bids_, *seed_);
  const bool settled = result["status"] == "settled";
  result_ = result;
  phase_ = settled ? Phase::Settled : Phase::Void;
  return append(settled ? "settled" : "voided", std::move(result), timestamp);
}

Session Session::replay(const std::vector<Event>& events) {
  if (events.empty()) throw integrity_error("journal is empty");
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].seq != i + 1)
      throw integrity_error("journal sequence broken at entry " + std::to_string(i + 1) + " (seq " +
                            std::to_string(events[i].seq) + ")");
  const auto& first = events.front();
  if (first.kind != "created") throw integrity_error("journal does not start with a created event");
  auto rejected = [](const Event& e, const std::string& why) {
    return integrity_error("journal entry " + std::to_string(e.seq) + " (" + e.kind + ") does not replay: " + why);
  };
  Session s;
  try {
    s = create(first.payload.at("id").get<std::string>(), first.payload.at("spec"), first.timestamp);
  } catch (const std::exception& ex) {
    throw rejected(first, ex.what());
  }
  for (std::size_t i = 1; i < events.size(); ++i) {
    const Event& e = events[i];
    try {
      if (e.kind == "configured") {
        s.configure(e.payload, e.timestamp);
      } else if (e.kind == "bid_submitted") {
        s.submit_bid(e.payload.at("bidder_id").get<std::string>(), e.payload.at("bid"), e.timestamp);
      } else if (e.kind == "search_started") {
        s.start_search(e.payload.at("seed").get<std::uint64_t>(), e.timestamp);
      } else if (e.kind == "settled" || e.kind == "voided") {
        s.finish_search(e.timestamp);
      } else {
        throw std::invalid_argument("unknown event kind");
      }
    } catch (const std::exception& ex) {
      throw rejected(e, ex.what());
    }
    const Event& mine = s.events_.back();
    if (mine.kind != e.kind || mine.payload.dump() != e.payload.dump())
      throw rejected(e, "re-executed event differs from the journaled one");
  }
  return s;
}

json Session::state_json() const {
  auto ev = json::array();
  for (const auto& e : events_) ev.push_back(event_to_json(e));
  return {{"id", id_},
          {"phase", to_string(phase_)},
          {"model", to_string(model_)},
          {"spec", spec_},
          {"config", config_},
          {"bids", bids_},
          {"seed", seed_ ? json(*seed_) : json(nullptr)},
          {"result", result_ ? *result_ : json(nullptr)},
          {"events", ev}};
}

json Session::view(const std::string& viewer) const {
  const bool closed = phase_ == Phase::Settled || phase_ == Phase::Void;
  json v{{"id", id_}, {"phase", to_string(phase_)}, {"viewer", viewer}};
  if (phase_ == Phase::Settled) v["settled_revenue"] = (*result_)["settlement"]["settled_revenue"];
  if (viewer == kPublic) return v;

  v["model"] = to_string(model_);
  v["spec"] = spec_;
  if (viewer == kAuctioneer) {
    v["config"] = config_;
    v["bid_count"] = bids_.size();
    if (closed) {
      v["bids"] = bids_;
      v["result"] = *result_;
    }
    return v;
  }

  if (!is_bidder(viewer)) throw forbidden("'" + viewer + "' is not a bidder in this session");
  // Other bidders' ids are stripped along with everything they submitted.
  json config = config_;
  config.erase("bidders");
  v["config"] = config;
  v["bidder_count"] = allowlist().size();
  const auto it = bids_.find(viewer);
  v["own_bid"] = it == bids_.end() ? json(nullptr) : it->second;
  if (closed) v["own_outcome"] = own_outcome(model_, *result_, viewer);
  return v;
}

}  // namespace qauction::service
