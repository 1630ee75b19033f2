#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "qauction/service/session.hpp"

namespace qauction::service {

/// Reads a JSON-lines journal. An unterminated last line is a torn write and is dropped;
/// any other unparsable line is an integrity error.
std::vector<Event> read_journal(const std::filesystem::path& path);

/// Appends events as LF-terminated JSON lines and flushes.
void append_journal(const std::filesystem::path& path, const std::vector<Event>& events);

/// Sessions kept in memory and journaled to <data_dir>/<id>.jsonl.
///
/// Operations on one session are serialized; views take a shared lock. A
/// command mutates a copy of the session, journals the new events and only
/// then publishes the copy, so a failed command leaves no trace.
class SessionStore {
 public:
  using Clock = std::function<std::string()>;

  /// Replays every journal found in data_dir. Sessions left in Searching are completed.
  explicit SessionStore(std::filesystem::path data_dir, Clock clock = {});

  std::string create(const json& spec);
  json configure(const std::string& id, const json& config);
  json submit_bid(const std::string& id, const std::string& bidder_id, const json& bid);
  json search(const std::string& id, std::uint64_t seed);

  json view(const std::string& id, const std::string& viewer) const;
  /// Full event log; auctioneer only.
  json events(const std::string& id, const std::string& viewer) const;

  /// Snapshot of a session for inspection and tests.
  Session snapshot(const std::string& id) const;
  std::vector<std::string> ids() const;
  const std::filesystem::path& data_dir() const noexcept { return dir_; }
  /// Journals that failed to replay at startup, with the reason.
  const std::map<std::string, std::string>& recovery_errors() const noexcept { return recovery_errors_; }

  static std::string utc_now();

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    Session session;
    explicit Entry(Session s) : session(std::move(s)) {}
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::filesystem::path journal_path(const std::string& id) const;
  std::string new_id();
  template <class F>
  json mutate(const std::string& id, F&& command);

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::string> recovery_errors_;
};

}  // namespace qauction::service
