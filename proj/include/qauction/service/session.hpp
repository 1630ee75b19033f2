#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Auction sessions as an event-sourced state machine. Every change to a
// session is an Event; applying the journal of events in order rebuilds the
// session, and re-running the search from the journaled seed must reproduce
// the journaled result exactly.
namespace qauction::service {

using nlohmann::json;

enum class Phase { Announced, Configured, Bidding, Searching, Settled, Void };

const char* to_string(Phase phase);
Phase phase_from_string(const std::string& text);

/// True for the edges of the phase machine, including a phase staying put.
bool legal_transition(Phase from, Phase to);

enum class Model { Hp, Ps, Gg };

const char* to_string(Model model);
Model model_from_string(const std::string& text);

/// Error with a machine-readable code and the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(std::string code, int status, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), status_(status) {}
  const std::string& code() const noexcept { return code_; }
  int status() const noexcept { return status_; }

 private:
  std::string code_;
  int status_;
};

ServiceError validation_error(const std::string& message);
ServiceError wrong_phase(const std::string& operation, Phase phase);
ServiceError not_found(const std::string& what);
ServiceError forbidden(const std::string& message);
ServiceError integrity_error(const std::string& message);

struct Event {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string kind;  // created | configured | bid_submitted | search_started | settled | voided
  json payload;

  friend bool operator==(const Event&, const Event&) = default;
};

json event_to_json(const Event& e);
Event event_from_json(const json& j);

inline constexpr const char* kAuctioneer = "auctioneer";
inline constexpr const char* kPublic = "public";

class Session {
 public:
  /// Validates the spec ({model: hp|ps|gg, ...metadata}) and records the created event.
  static Session create(const std::string& id, const json& spec, const std::string& timestamp);

  /// Freezes the model configuration; the session moves through Configured to Bidding.
  const Event& configure(const json& config, const std::string& timestamp);
  /// Stores (or replaces) one bidder's bid.
  const Event& submit_bid(const std::string& bidder_id, const json& bid, const std::string& timestamp);
  /// Records the seed and enters Searching.
  const Event& start_search(std::uint64_t seed, const std::string& timestamp);
  /// Runs the model from the recorded seed and ends in Settled or Void.
  const Event& finish_search(const std::string& timestamp);

  /// Rebuilds a session from its journal, re-validating every command and re-running the search.
  /// A journal ending in search_started yields a session in Searching.
  static Session replay(const std::vector<Event>& events);

  const std::string& id() const noexcept { return id_; }
  Phase phase() const noexcept { return phase_; }
  Model model() const noexcept { return model_; }
  const json& spec() const noexcept { return spec_; }
  const json& config() const noexcept { return config_; }
  const std::map<std::string, json>& bids() const noexcept { return bids_; }
  const std::optional<json>& result() const noexcept { return result_; }
  const std::vector<Event>& events() const noexcept { return events_; }

  /// Everything the session holds; two sessions are equal iff these serialize identically.
  json state_json() const;

  /// Redacted document for a bidder id, "auctioneer" or "public".
  json view(const std::string& viewer) const;
  bool is_bidder(const std::string& id) const;

 private:
  Session() = default;
  const Event& append(std::string kind, json payload, const std::string& timestamp);
  std::vector<std::string> allowlist() const;

  std::string id_;
  Phase phase_ = Phase::Announced;
  Model model_ = Model::Hp;
  json spec_;
  json config_;
  std::map<std::string, json> bids_;
  std::optional<std::uint64_t> seed_;
  std::optional<json> result_;
  std::vector<Event> events_;
};

}  // namespace qauction::service
