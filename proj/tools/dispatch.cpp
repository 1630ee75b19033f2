#include "qauction/cli/dispatch.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "qauction/gg/market.hpp"
#include "qauction/hp/auction.hpp"
#include "qauction/multifractal/mfdfa.hpp"
#include "qauction/ps/exchange.hpp"
#include "qauction/service/http.hpp"

namespace qauction::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Input problems the user can fix; mapped to exit code 1.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Whole document to a sibling temp file, then rename over the target.
void write_atomic(const std::string& path, const std::string& data) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << data;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
  }
  fs::rename(tmp, target);
}

// Writes the payload to --out (or `out` when absent) and prints the summary line.
void emit(const Common& c, const std::string& payload, const std::string& summary, std::ostream& out,
          std::ostream& err) {
  if (c.out.empty()) {
    out << payload;
    err << summary << '\n';
  } else {
    write_atomic(c.out, payload);
    out << summary << " -> " << c.out << '\n';
  }
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

void add_common(CLI::App* app, Common& c, const std::string& default_format, bool config_required = true) {
  auto* opt = app->add_option("--config", c.config, "JSON configuration file");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output file (written atomically); standard output if omitted");
  c.format = default_format;
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app->add_option("--seed", c.seed, "override the seed in the config");
}

int gg_sim(const Common& c, std::ostream& out, std::ostream& err) {
  auto cfg = gg::config_from_json(read_json(c.config));
  if (c.seed) cfg.seed = *c.seed;
  const auto series = gg::run_market(cfg);
  std::string payload;
  if (c.format == "csv") {
    std::ostringstream s;
    gg::write_csv(s, series);
    payload = s.str();
  } else {
    payload = json{{"config", gg::config_to_json(cfg)}, {"series", gg::series_to_json(series)}}.dump(2) + "\n";
  }
  std::string summary = "gg-sim: " + std::to_string(cfg.rounds) + " rounds, seed " + std::to_string(cfg.seed) +
                        ", final log price " + fixed(series.log_prices.back(), 10) + ", max boundary mass " +
                        fixed(series.max_boundary_mass, 3);
  if (series.leak_warning) summary += " (truncation leak warning)";
  emit(c, payload, summary, out, err);
  return kOk;
}

int mfdfa_cmd(const Common& c, const std::string& input, std::ostream& out, std::ostream& err) {
  std::istringstream in(read_file(input));
  const auto log_prices = gg::read_log_prices_csv(in);
  if (log_prices.size() < 2) throw InputError("price series needs at least two rows");
  std::vector<double> returns(log_prices.size() - 1), abs_returns(returns.size());
  for (std::size_t i = 0; i + 1 < log_prices.size(); ++i) {
    returns[i] = log_prices[i + 1] - log_prices[i];
    abs_returns[i] = std::abs(returns[i]);
  }
  const json params = c.config.empty() ? json::object() : read_json(c.config);
  const auto q = params.value("q", multifractal::default_q_values());
  const int order = params.value("order", 1);
  const int n = static_cast<int>(returns.size());
  const int min_scale = params.value("min_scale", 16);
  const int max_scale = params.value("max_scale", std::min(1024, n / 4));
  const int count = params.value("scale_count", 12);
  if (max_scale <= min_scale) throw InputError("series of " + std::to_string(n) + " returns is too short for MF-DFA");
  const auto scales = multifractal::log_spaced_scales(min_scale, max_scale, count);

  const auto r = multifractal::mfdfa(returns, q, scales, order);
  const auto a = multifractal::mfdfa(abs_returns, q, scales, order);
  std::string payload;
  if (c.format == "csv") {
    std::ostringstream s;
    s << std::setprecision(17) << "series,q,h,r2\n";
    for (const auto& [name, spec] : {std::pair{"returns", &r}, std::pair{"abs_returns", &a}})
      for (std::size_t i = 0; i < spec->q_values.size(); ++i)
        s << name << ',' << spec->q_values[i] << ',' << spec->h[i] << ',' << spec->fit_r2[i] << '\n';
    payload = s.str();
  } else {
    payload = json{{"input", input},
                   {"returns_count", n},
                   {"returns", multifractal::spectrum_to_json(r)},
                   {"abs_returns", multifractal::spectrum_to_json(a)}}
                  .dump(2) +
              "\n";
  }
  emit(c, payload,
       "mfdfa: " + std::to_string(n) + " returns, width " + fixed(multifractal::spectrum_width(r), 4) +
           " (returns), " + fixed(multifractal::spectrum_width(a), 4) + " (|returns|)",
       out, err);
  return kOk;
}

int ps_round(const Common& c, std::ostream& out, std::ostream& err) {
  auto ensemble = ps::ensemble_from_json(read_json(c.config));
  if (c.seed) ensemble.seed = *c.seed;
  const auto report = ps::market_round(ensemble.traders, ensemble.risk, ensemble.seed);
  std::string payload;
  if (c.format == "csv") {
    std::ostringstream s;
    s << std::setprecision(17) << "buyer,seller,price,buyer_log_price,seller_log_price\n";
    for (const auto& t : report.outcome.trades)
      s << t.buyer << ',' << t.seller << ',' << t.price << ',' << t.buyer_log_price << ',' << t.seller_log_price << '\n';
    payload = s.str();
  } else {
    auto j = ps::report_to_json(report);
    j["seed"] = ensemble.seed;
    payload = j.dump(2) + "\n";
  }
  std::string summary = "ps-round: " + std::to_string(ensemble.traders.size()) + " traders, " +
                        std::to_string(report.outcome.trades.size()) + " trades";
  summary += report.outcome.price ? " at price " + fixed(*report.outcome.price, 8) : ", no crossing";
  emit(c, payload, summary, out, err);
  return kOk;
}

int hp_run(const Common& c, std::optional<int> runs, std::optional<int> steps, std::optional<double> dt,
           std::ostream& out, std::ostream& err) {
  auto doc = hp::auction_from_json(read_json(c.config));
  if (c.seed) doc.search.seed = *c.seed;
  if (runs) doc.search.runs = *runs;
  if (steps) doc.search.steps = *steps;
  if (dt) doc.search.dt = *dt;
  doc.search.validate();
  const auto stats = hp::run_auction(doc.bids, doc.instance, doc.search);
  std::vector<std::string> ids;
  for (const auto& b : doc.bids) ids.push_back(b.bidder_id);
  std::string payload;
  if (c.format == "csv") {
    std::ostringstream s;
    s << std::setprecision(17) << "index,count,frequency,feasible,revenue\n";
    for (const auto& o : stats.outcomes)
      s << o.index << ',' << o.count << ',' << static_cast<double>(o.count) / stats.runs << ','
        << (o.outcome.feasible ? 1 : 0) << ',' << o.outcome.revenue << '\n';
    payload = s.str();
  } else {
    auto j = hp::stats_to_json(stats, ids, doc.instance.reg.p_item);
    j["search"] = {{"steps", doc.search.steps}, {"dt", doc.search.dt}, {"seed", doc.search.seed}};
    payload = j.dump(2) + "\n";
  }
  emit(c, payload,
       "hp-run: success_rate " + fixed(stats.success_rate, 4) + " over " + std::to_string(stats.runs) +
           " runs, oracle revenue " + fixed(stats.oracle.revenue) + ", mean revenue " + fixed(stats.mean_revenue, 4),
       out, err);
  return kOk;
}

int serve_cmd(const std::string& host, int port, std::string data_dir, std::ostream& out, std::ostream& err) {
  if (data_dir.empty()) {
    const char* env = std::getenv(kDataDirEnv);
    data_dir = env && *env ? env : "qauction-data";
  }
  service::SessionStore store(data_dir);
  for (const auto& [id, why] : store.recovery_errors()) err << "warning: session " << id << " not recovered: " << why << '\n';
  out << "serve: " << store.ids().size() << " sessions from " << data_dir << ", listening on " << host << ':' << port
      << std::endl;
  if (!service::serve(store, host, port)) {
    err << "error: cannot listen on " << host << ':' << port << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Quantum-market simulations, analysis and the auction service", "qauction");
  app.require_subcommand(1);

  Common gg, mf, ps, hp;
  auto* gg_cmd = app.add_subcommand("gg-sim", "two-mode displacement market, writes the price series");
  add_common(gg_cmd, gg, "csv");

  std::string input;
  auto* mf_cmd = app.add_subcommand("mfdfa", "generalized Hurst spectra of returns and |returns| from a gg-sim CSV");
  mf_cmd->add_option("--input", input, "price series CSV (log_price column)")->required()->check(CLI::ExistingFile);
  add_common(mf_cmd, mf, "json", false);

  auto* ps_cmd = app.add_subcommand("ps-round", "one bargaining round over a trader ensemble");
  add_common(ps_cmd, ps, "json");

  std::optional<int> runs, steps;
  std::optional<double> dt;
  auto* hp_cmd = app.add_subcommand("hp-run", "qubit-register auction: repeated adiabatic search with statistics");
  add_common(hp_cmd, hp, "json");
  hp_cmd->add_option("--runs", runs, "number of repetitions");
  hp_cmd->add_option("--steps", steps, "schedule length T");
  hp_cmd->add_option("--dt", dt, "time step");

  std::string host = "127.0.0.1", data_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the auction service over HTTP");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--data-dir", data_dir, std::string("journal directory (default $") + kDataDirEnv + ")");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::Normal);
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (*gg_cmd) return gg_sim(gg, out, err);
    if (*mf_cmd) return mfdfa_cmd(mf, input, out, err);
    if (*ps_cmd) return ps_round(ps, out, err);
    if (*hp_cmd) return hp_run(hp, runs, steps, dt, out, err);
    if (*serve) return serve_cmd(host, port, data_dir, out, err);
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

}  // namespace qauction::cli
