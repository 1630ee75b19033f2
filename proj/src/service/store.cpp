#include "qauction/service/store.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace qauction::service {

namespace fs = std::filesystem;

std::vector<Event> read_journal(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw not_found("journal " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::vector<Event> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;  // torn final write
    ++line_no;
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    json j;
    try {
      j = json::parse(line);
      events.push_back(event_from_json(j));
    } catch (const std::exception& e) {
      throw integrity_error(path.filename().string() + ": line " + std::to_string(line_no) + " is corrupt (" +
                            e.what() + ")");
    }
  }
  return events;
}

void append_journal(const fs::path& path, const std::vector<Event>& events) {
  std::string text;
  for (const auto& e : events) text += event_to_json(e).dump() + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("cannot append to journal " + path.string());
}

std::string SessionStore::utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return s.str();
}

SessionStore::SessionStore(fs::path data_dir, Clock clock) : dir_(std::move(data_dir)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_now;
  fs::create_directories(dir_);
  for (const auto& file : fs::directory_iterator(dir_)) {
    if (file.path().extension() != ".jsonl") continue;
    const std::string stem = file.path().stem().string();
    try {
      Session s = Session::replay(read_journal(file.path()));
      if (s.id() != stem) throw integrity_error("journal " + stem + " holds session " + s.id());
      if (s.phase() == Phase::Searching) {
        // The result line was lost; the search is deterministic given the journaled seed.
        const Event& e = s.finish_search(clock_());
        append_journal(file.path(), {e});
      }
      sessions_.emplace(stem, std::make_shared<Entry>(std::move(s)));
    } catch (const std::exception& e) {
      recovery_errors_[stem] = e.what();
    }
  }
}

fs::path SessionStore::journal_path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

std::string SessionStore::new_id() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << gen();
  return s.str();
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("session '" + id + "'");
  return it->second;
}

std::string SessionStore::create(const json& spec) {
  std::lock_guard lock(map_mutex_);
  std::string id;
  do id = new_id();
  while (sessions_.count(id) || fs::exists(journal_path(id)));
  Session s = Session::create(id, spec, clock_());
  append_journal(journal_path(id), s.events());
  sessions_.emplace(id, std::make_shared<Entry>(std::move(s)));
  return id;
}

template <class F>
json SessionStore::mutate(const std::string& id, F&& command) {
  const auto entry = find(id);
  std::unique_lock lock(entry->mutex);
  Session next = entry->session;
  const std::size_t before = next.events().size();
  json response = command(next);
  const std::vector<Event> fresh(next.events().begin() + static_cast<std::ptrdiff_t>(before), next.events().end());
  append_journal(journal_path(id), fresh);
  entry->session = std::move(next);
  return response;
}

json SessionStore::configure(const std::string& id, const json& config) {
  return mutate(id, [&](Session& s) {
    const Event& e = s.configure(config, clock_());
    return json{{"id", id}, {"phase", to_string(s.phase())}, {"seq", e.seq}};
  });
}

json SessionStore::submit_bid(const std::string& id, const std::string& bidder_id, const json& bid) {
  return mutate(id, [&](Session& s) {
    const Event& e = s.submit_bid(bidder_id, bid, clock_());
    return json{{"id", id}, {"bidder_id", bidder_id}, {"phase", to_string(s.phase())}, {"seq", e.seq}};
  });
}

json SessionStore::search(const std::string& id, std::uint64_t seed) {
  return mutate(id, [&](Session& s) {
    s.start_search(seed, clock_());
    const Event& e = s.finish_search(clock_());
    return json{{"id", id}, {"phase", to_string(s.phase())}, {"seq", e.seq}, {"settlement", e.payload["settlement"]}};
  });
}

json SessionStore::view(const std::string& id, const std::string& viewer) const {
  const auto entry = find(id);
  std::shared_lock lock(entry->mutex);
  return entry->session.view(viewer);
}

json SessionStore::events(const std::string& id, const std::string& viewer) const {
  const auto entry = find(id);
  if (viewer != kAuctioneer) throw forbidden("the event log is visible to the auctioneer only");
  std::shared_lock lock(entry->mutex);
  auto out = json::array();
  for (const auto& e : entry->session.events()) out.push_back(event_to_json(e));
  return {{"id", id}, {"events", out}};
}

Session SessionStore::snapshot(const std::string& id) const {
  const auto entry = find(id);
  std::shared_lock lock(entry->mutex);
  return entry->session;
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, entry] : sessions_) out.push_back(id);
  return out;
}

}  // namespace qauction::service
