#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <vector>
#include <random>
#include <string>

#include <json.hpp>

namespace qauction::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("qauction-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Deterministic clock for journals: 2024-01-01T00:00:00.000Z plus one second per call.
struct CountingClock {
  std::shared_ptr<int> ticks = std::make_shared<int>(0);
  std::string operator()() const {
    const int t = (*ticks)++;
    char buf[32];
    std::snprintf(buf, sizeof buf, "2024-01-01T%02d:%02d:%02d.000Z", t / 3600 % 24, t / 60 % 60, t % 60);
    return buf;
  }
};

inline nlohmann::json pinned_hp_config() {
  return nlohmann::json::parse(R"({
    "register": {"p_item": 2, "p_price": 2}, "tick": 1, "items": 2,
    "bidders": ["A", "B"],
    "search": {"steps": 200, "dt": 0.5, "runs": 20}
  })");
}

inline nlohmann::json pinned_hp_bid(const std::string& who) {
  if (who == "A")
    return nlohmann::json::parse(R"({"terms": [{"bundle": "01", "level": 3, "amp": [0.7071067811865476, 0]},
                                               {"bundle": "10", "level": 1, "amp": [0.7071067811865476, 0]}]})");
  return nlohmann::json::parse(R"({"terms": [{"bundle": "10", "level": 2, "amp": [0.7071067811865476, 0]},
                                             {"bundle": "01", "level": 1, "amp": [0.7071067811865476, 0]}]})");
}

/// Every object key on the path to a value, for structural scans of JSON views.
template <class Visit>
void walk_keys(const nlohmann::json& j, std::vector<std::string>& path, Visit&& visit) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      path.push_back(k);
      visit(path, v);
      walk_keys(v, path, visit);
      path.pop_back();
    }
  } else if (j.is_array()) {
    for (const auto& v : j) walk_keys(v, path, visit);
  }
}

/// Redaction scan of a serialized bidder view: no other bidder's id anywhere, and bid or
/// outcome fields only under own_bid / own_outcome. Returns the first violation, or "".
inline std::string redaction_violation(const nlohmann::json& view, const std::vector<std::string>& others) {
  const std::string text = view.dump();
  for (const auto& o : others)
    if (text.find("\"" + o + "\"") != std::string::npos) return "mentions bidder " + o;
  static const std::vector<std::string> private_keys{"amp",  "bundle", "level", "terms", "psi",     "gaussian",
                                                     "side", "mean",   "std",   "flow",  "allocation", "bids"};
  std::string found;
  std::vector<std::string> path;
  walk_keys(view, path, [&](const std::vector<std::string>& p, const nlohmann::json&) {
    if (!found.empty()) return;
    if (std::find(private_keys.begin(), private_keys.end(), p.back()) == private_keys.end()) return;
    if (p.front() != "own_bid" && p.front() != "own_outcome") found = "private key '" + p.back() + "' outside own fields";
  });
  return found;
}

}  // namespace qauction::testing
