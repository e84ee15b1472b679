#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "probelab/bounds.hpp"
#include "probelab/compression.hpp"

namespace probelab::cli {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& source) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(source + " is not an unsigned 64-bit integer: '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError(source + " is out of range: '" + text + "'");
  }
}

std::string timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream os;
  os << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string num(double x) { return json(x).dump(); }
std::string flag(bool b) { return b ? "true" : "false"; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const std::string& command, const ExperimentConfig& exp, json results) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = command;
  doc["config_hash"] = exp.hash;
  doc["config"] = exp.config;
  if (exp.timestamp) doc["generated_at"] = timestamp_now();
  doc["results"] = std::move(results);
  write_text(path, doc.dump(2) + "\n");
}

json describe(const SketchDescriptor& d) {
  return json{{"name", d.name}, {"n", d.n}, {"S", d.S}, {"t_u", d.t_u}, {"w", d.w}, {"delta", d.delta}};
}

json game_summary(const GameConfig& gc, const GameStats& s) {
  const auto probe = make_factory(gc.sketch_params()).make(SketchSeed(gc.master_seed));
  const double k = static_cast<double>(s.query_budget);
  return json{
      {"sketch", describe(probe->declared())},
      {"problem", to_string(gc.problem)},
      {"trials", s.trials.size()},
      {"successes", s.successes},
      {"success_rate", s.success_rate},
      {"wilson", {{"low", s.wilson_low}, {"high", s.wilson_high}}},
      {"mean_message_bits", s.mean_message_bits},
      {"mean_queries", s.mean_queries},
      {"max_probes_per_update", s.max_probes_per_update},
      {"checks", s.checks},
      {"check_errors", s.check_errors},
      {"per_query_failure", s.per_query_failure},
      {"query_budget", s.query_budget},
      {"union_bound_success", std::max(0.0, 1.0 - k * s.per_query_failure)},
      {"audit_violations", s.audit_violations},
      {"ambiguous_trials", s.ambiguous_trials},
      {"information_bits", s.information_bits},
  };
}

const std::vector<std::string> kGameColumns = {"trial_id", "problem", "n", "a", "C", "success", "queries_used",
                                               "message_bits", "max_probes_per_update", "config_hash"};

std::string game_csv(const GameConfig& gc, const GameStats& s, const std::string& hash) {
  std::string out = csv_row(kGameColumns);
  for (const TrialRecord& r : s.trials) {
    out += csv_row({std::to_string(r.trial_id), to_string(gc.problem), std::to_string(gc.n), std::to_string(gc.a),
                    to_string(gc.C), flag(r.success), std::to_string(r.queries_used), std::to_string(r.message_bits),
                    std::to_string(r.max_probes_per_update), hash});
  }
  return out;
}

/// Resolves "lg_n", "lg_n_squared" and "lg_over_loglog_squared" space
/// shorthands for bounds sweeps.
std::uint64_t sweep_space(const json& s, unsigned lg_n) {
  if (s.is_number_unsigned()) return s.get<std::uint64_t>();
  const double lg = lg_n;
  const std::string name = s.is_string() ? s.get<std::string>() : "";
  if (name == "lg_n") return lg_n;
  if (name == "lg_n_squared") return std::uint64_t{lg_n} * lg_n;
  if (name == "lg_over_loglog_squared") {
    const double g = lg / std::log2(lg);
    return static_cast<std::uint64_t>(std::ceil(g * g));
  }
  throw ConfigError("bounds.sweep.S entries must be integers or one of lg_n, lg_n_squared, lg_over_loglog_squared");
}

json& at_path(json& root, const std::string& dotted) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object()) throw ConfigError("sweep parameter path '" + dotted + "' does not name an object field");
    node = &(*node)[key];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

}  // namespace

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

ExperimentConfig resolve(json file, const Overrides& ov) {
  if (!file.is_object()) throw ConfigError("config must be a JSON object");
  if (!file.contains("schema_version") || file["schema_version"] != kSchemaVersion) {
    throw ConfigError("config needs \"schema_version\": " + std::to_string(kSchemaVersion));
  }
  reject_unknown(file,
                 {"schema_version", "description", "master_seed", "trials", "threads", "timestamp", "game",
                  "compression", "verify", "cell_sample", "bounds", "sweep"},
                 "config");
  ExperimentConfig exp;
  exp.master_seed = get_or<std::uint64_t>(file, "master_seed", 0);
  if (ov.env_seed) exp.master_seed = parse_seed_text(*ov.env_seed, "PROBE_LAB_SEED");
  if (ov.seed) exp.master_seed = *ov.seed;
  exp.trials = ov.trials ? *ov.trials : get_or<std::size_t>(file, "trials", 100);
  exp.threads = ov.threads ? *ov.threads : get_or<unsigned>(file, "threads", 1);
  if (exp.threads == 0) throw ConfigError("threads must be at least 1");
  exp.timestamp = get_or<bool>(file, "timestamp", true);
  file.erase("threads");
  file["master_seed"] = exp.master_seed;
  file["trials"] = exp.trials;
  exp.config = std::move(file);
  exp.hash = config_hash(exp.config);
  return exp;
}

Wide parse_wide_value(const json& j) {
  if (j.is_number_integer()) return j.is_number_unsigned() ? Wide(j.get<std::uint64_t>()) : Wide(j.get<std::int64_t>());
  if (!j.is_string()) throw ConfigError("expected an integer or an integer string");
  const std::string text = j.get<std::string>();
  try {
    const auto caret = text.find('^');
    if (caret == std::string::npos) return parse_wide(text);
    const Wide base = parse_wide(text.substr(0, caret));
    const Wide exp = parse_wide(text.substr(caret + 1));
    if (exp < 0 || exp > 127) throw ConfigError("exponent out of range in '" + text + "'");
    auto v = checked_pow(base, static_cast<unsigned>(exp));
    if (!v) throw ConfigError("'" + text + "' overflows 127 bits");
    return *v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bad integer '" + text + "': " + e.what());
  }
}

SketchParams parse_sketch(const json& j) {
  reject_unknown(j,
                 {"name", "d", "b", "w", "delta", "seed", "counter_bits", "alpha", "magnitude_bound",
                  "support_threshold", "n"},
                 "sketch");
  SketchParams p;
  p.name = get_or<std::string>(j, "name", p.name);
  p.n = get_or<Index>(j, "n", p.n);
  p.d = get_or<unsigned>(j, "d", p.d);
  p.b = get_or<unsigned>(j, "b", p.b);
  p.w = get_or<unsigned>(j, "w", p.w);
  p.delta = get_or<double>(j, "delta", p.delta);
  p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
  p.counter_bits = get_or<unsigned>(j, "counter_bits", p.counter_bits);
  p.alpha = get_or<unsigned>(j, "alpha", p.alpha);
  if (j.contains("magnitude_bound")) p.magnitude_bound = parse_wide_value(j["magnitude_bound"]);
  p.support_threshold = get_or<double>(j, "support_threshold", p.support_threshold);
  return p;
}

GameConfig parse_game(const json& j, const ExperimentConfig& exp) {
  reject_unknown(j, {"n", "a", "C", "problem", "p", "M", "exhaustive", "sketch"}, "game");
  GameConfig g;
  g.n = get_or<Index>(j, "n", g.n);
  g.a = get_or<unsigned>(j, "a", g.a);
  if (j.contains("C")) g.C = parse_wide_value(j["C"]);
  try {
    g.problem = parse_problem(get_or<std::string>(j, "problem", "point_query"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!j.contains("C") && g.problem == Problem::entropy) g.C = 1024;
  g.p = get_or<int>(j, "p", g.p);
  if (j.contains("M")) g.M = parse_wide_value(j["M"]);
  g.exhaustive = get_or<bool>(j, "exhaustive", false);
  if (j.contains("sketch")) g.sketch = parse_sketch(j["sketch"]);
  g.trials = exp.trials;
  g.master_seed = exp.master_seed;
  g.threads = exp.threads;
  return g;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += ',';
    out += csv_field(fields[k]);
  }
  out += "\r\n";
  return out;
}

int cmd_verify_nonadaptive(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  const json block = exp.config.value("verify", json::object());
  reject_unknown(block, {"sketches"}, "verify");
  const json sketches = block.value("sketches", json::array());
  if (!sketches.is_array()) throw ConfigError("verify.sketches must be an array");

  std::vector<SketchFactory> factories;
  for (const json& s : sketches) factories.push_back(make_factory(parse_sketch(s)));

  json reports = json::array();
  std::size_t offenders = 0;
  for (std::size_t k = 0; k < factories.size(); ++k) {
    const NonadaptiveReport r =
        verify_nonadaptive(factories[k], exp.trials, SketchSeed(exp.master_seed).derive("verify", k));
    const auto declared = factories[k].make(SketchSeed(exp.master_seed))->declared();
    reports.push_back(json{{"sketch", r.sketch},
                           {"trials", r.trials},
                           {"violations", r.violations},
                           {"details", r.details},
                           {"S", declared.S},
                           {"t_u", declared.t_u}});
    if (r.violations > 0) {
      ++offenders;
      log << "violation: " << r.sketch << " (" << r.violations << " of " << r.trials << " trials)\n";
    }
  }
  write_json(out / "verify_nonadaptive.json", "verify-nonadaptive", exp,
             json{{"reports", reports}, {"offenders", offenders}});
  return offenders ? kExitViolation : kExitOk;
}

int cmd_run_game(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  if (!exp.config.contains("game")) throw ConfigError("run-game needs a \"game\" block");
  const GameConfig gc = parse_game(exp.config["game"], exp);
  const GameStats stats = run_game(gc);
  write_text(out / "game_trials.csv", game_csv(gc, stats, exp.hash));
  write_json(out / "game_summary.json", "run-game", exp, game_summary(gc, stats));
  log << "success rate " << stats.success_rate << " over " << stats.trials.size() << " trials\n";
  return stats.audit_violations ? kExitViolation : kExitOk;
}

int cmd_compress_demo(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  if (!exp.config.contains("game")) throw ConfigError("compress-demo needs a \"game\" block");
  const GameConfig gc = parse_game(exp.config["game"], exp);
  const json block = exp.config.value("compression", json::object());
  reject_unknown(block, {"scan_limit", "identity_first"}, "compression");
  CompressDemoOptions opt;
  opt.scan_limit = get_or<std::uint64_t>(block, "scan_limit", opt.scan_limit);
  opt.identity_first = get_or<bool>(block, "identity_first", opt.identity_first);

  const CompressDemoReport r = run_compress_demo(gc, opt);
  std::string csv = csv_row({"trial_id", "covered", "perm_index", "full_success", "compressed_success", "non_erring",
                             "decisions_equal", "config_hash"});
  for (const CompressTrial& t : r.trials) {
    csv += csv_row({std::to_string(t.trial_id), flag(t.covered), std::to_string(t.perm_index), flag(t.full_success),
                    flag(t.compressed_success), flag(t.non_erring), flag(t.decisions_equal), exp.hash});
  }
  write_text(out / "compress_trials.csv", csv);

  json results{
      {"sketch", r.sketch},
      {"n", r.n},
      {"a", r.a},
      {"S", r.S},
      {"t_u", r.t_u},
      {"w", r.w},
      {"covered_indices", r.covered_indices},
      {"certificate", r.certificate},
      {"bound_status", r.precondition_met ? "precondition met" : "precondition unmet"},
      {"precondition_detail", r.precondition_detail},
      {"family", {{"k", r.family.k_decimal}, {"log2_k", r.family.log2_k}, {"index_bits", r.family.index_bits}}},
      {"full_bits", r.full_bits},
      {"compressed_bits", r.compressed_bits},
      {"bound_bits", r.bound_bits},
      {"within_bound", r.within_bound},
      {"coverage", {{"exact", r.coverage.exact}, {"lower_bound", r.coverage.lower_bound}, {"fraction", r.coverage.exact_fraction}}},
      {"first_permutation_hit_rate", r.first_permutation_hit_rate},
      {"trials", r.trials.size()},
      {"covered_trials", r.covered_trials},
      {"non_erring_trials", r.non_erring_trials},
      {"equal_trials", r.equal_trials},
      {"equality_rate", r.equality_rate},
  };
  write_json(out / "compress_demo.json", "compress-demo", exp, std::move(results));
  log << "compressed " << r.compressed_bits << " bits vs full " << r.full_bits << "; equality rate "
      << r.equality_rate << " over " << r.non_erring_trials << " non-erring trials"
      << (r.precondition_met ? "" : " (precondition unmet)") << "\n";
  return r.equal_trials == r.non_erring_trials ? kExitOk : kExitViolation;
}

int cmd_cell_sample(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  const json block = exp.config.value("cell_sample", json::object());
  reject_unknown(block, {"sketches"}, "cell_sample");
  const json sketches = block.value("sketches", json::array());
  json rows = json::array();
  bool all_hold = true;
  for (std::size_t k = 0; k < sketches.size(); ++k) {
    const SketchFactory factory = make_factory(parse_sketch(sketches[k]));
    const auto sketch = factory.make(SketchSeed(exp.master_seed).derive("cell_sample", k));
    const CellSample s = cell_sample(*sketch);
    Index largest = 0;
    for (const auto& [cells, count] : s.class_census) largest = std::max(largest, count);
    const bool holds = s.certificate_holds();
    all_hold = all_hold && holds;
    rows.push_back(json{{"sketch", sketch->name()},
                        {"n", s.n},
                        {"S", s.S},
                        {"t_u", s.t_u},
                        {"cells", s.cells},
                        {"covered_count", s.covered.size()},
                        {"classes", s.class_census.size()},
                        {"largest_class", largest},
                        {"log2_binomial_S_t_u", log2_binomial(s.S, s.t_u)},
                        {"certificate", holds}});
    log << sketch->name() << ": |I^C| = " << s.covered.size() << (holds ? "" : " (certificate fails)") << "\n";
  }
  write_json(out / "cell_sample.json", "cell-sample", exp, json{{"samples", rows}});
  return all_hold ? kExitOk : kExitViolation;
}

int cmd_bounds_report(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  const json block = exp.config.value("bounds", json::object());
  reject_unknown(block, {"sketches", "k", "c", "sweep", "trends"}, "bounds");
  const double c = get_or<double>(block, "c", 1.0);

  std::string table = csv_row({"sketch", "n", "S_measured", "t_u_measured", "det_bound", "rand_bound",
                               "preconditions_met", "config_hash"});
  json consistency = json::array();
  const json sketches = block.value("sketches", json::array());
  for (std::size_t k = 0; k < sketches.size(); ++k) {
    const SketchParams params = parse_sketch(sketches[k]);
    const double queries = get_or<double>(block, "k", static_cast<double>(params.n));
    const BoundRow row =
        bound_row(make_factory(params), SketchSeed(exp.master_seed).derive("bounds", k), queries, c);
    table += csv_row({row.sketch, std::to_string(row.n), std::to_string(row.S_measured),
                      std::to_string(row.t_u_measured), std::to_string(row.det_bound), std::to_string(row.rand_bound),
                      flag(row.preconditions_met), exp.hash});
    consistency.push_back(
        json{{"sketch", row.sketch}, {"n", row.n}, {"t_u_at_least_det_bound", row.t_u_measured >= row.det_bound}});
  }
  write_text(out / "bounds.csv", table);

  std::string sweep = csv_row({"n", "S", "delta", "k", "det_bound", "rand_bound", "config_hash"});
  const json grid = block.value("sweep", json::object());
  reject_unknown(grid, {"lg_n", "S", "delta", "k"}, "bounds.sweep");
  const json lg_ns = grid.value("lg_n", json::array());
  const json spaces = grid.value("S", json::array());
  const json deltas = grid.value("delta", json::array());
  const json ks = grid.value("k", json::array({1}));
  for (const json& e : lg_ns) {
    const unsigned lg_n = e.get<unsigned>();
    if (lg_n < 1 || lg_n > 63) throw ConfigError("bounds.sweep.lg_n entries must lie in [1, 63]");
    for (const json& s : spaces) {
      for (const json& d : deltas) {
        for (const json& kq : ks) {
          BoundParams p;
          p.n = Index{1} << lg_n;
          p.S = sweep_space(s, lg_n);
          p.delta = d.get<double>();
          p.k = kq.get<double>();
          p.c = c;
          sweep += csv_row({std::to_string(p.n), std::to_string(p.S), num(p.delta), num(p.k),
                            std::to_string(deterministic_bound(p.n, p.S, c)), std::to_string(randomized_bound(p)),
                            exp.hash});
        }
      }
    }
  }
  write_text(out / "bounds_sweep.csv", sweep);

  const json trends_cfg = block.value("trends", json::object());
  reject_unknown(trends_cfg, {"min_lg_n", "max_lg_n", "tolerance"}, "bounds.trends");
  const unsigned lo = get_or<unsigned>(trends_cfg, "min_lg_n", 10);
  const unsigned hi = get_or<unsigned>(trends_cfg, "max_lg_n", 30);
  const double tol = get_or<double>(trends_cfg, "tolerance", 0.2);
  json trends = json::object();
  bool trends_ok = true;
  for (auto [name, regime] : {std::pair{"S = lg n", SpaceRegime::log_n},
                              std::pair{"S = (lg n / lg lg n)^2", SpaceRegime::log_over_loglog_squared}}) {
    const TrendCheck t = deterministic_trend(regime, lo, hi, c, tol);
    trends[name] = json{{"n", t.n},
                        {"det_bound", t.t},
                        {"ratio", t.ratio},
                        {"mean_ratio", t.mean_ratio},
                        {"max_deviation", t.max_deviation},
                        {"within_tolerance", t.within_tolerance}};
    trends_ok = trends_ok && t.within_tolerance;
    log << name << ": max deviation " << t.max_deviation << (t.within_tolerance ? "" : " (outside tolerance)") << "\n";
  }
  write_json(out / "bounds_summary.json", "bounds-report", exp,
             json{{"label", "shape functions with explicit constant c; trend comparison only"},
                  {"c", c},
                  {"trends", trends},
                  {"consistency", consistency}});
  return trends_ok ? kExitOk : kExitViolation;
}

int cmd_sweep(const ExperimentConfig& exp, const fs::path& out, std::ostream& log) {
  const json block = exp.config.value("sweep", json::object());
  reject_unknown(block, {"game", "parameter", "values"}, "sweep");
  const json base = block.value("game", json::object());
  const std::string parameter = get_or<std::string>(block, "parameter", "");
  const json values = block.value("values", json::array());
  if (!values.empty() && parameter.empty()) throw ConfigError("sweep needs a parameter when values are given");

  std::string csv = csv_row({"parameter", "value", "problem", "sketch", "n", "a", "C", "success_rate", "wilson_low",
                             "wilson_high", "mean_message_bits", "mean_queries", "per_query_failure",
                             "max_probes_per_update", "information_bits", "config_hash"});
  json points = json::array();
  std::uint64_t audits = 0;
  for (const json& value : values) {
    json game = base;
    at_path(game, parameter) = value;
    const GameConfig gc = parse_game(game, exp);
    const GameStats s = run_game(gc);
    audits += s.audit_violations;
    const std::string shown = value.is_string() ? value.get<std::string>() : value.dump();
    csv += csv_row({parameter, shown, to_string(gc.problem), gc.sketch.name, std::to_string(gc.n),
                    std::to_string(gc.a), to_string(gc.C), num(s.success_rate), num(s.wilson_low),
                    num(s.wilson_high), num(s.mean_message_bits), num(s.mean_queries), num(s.per_query_failure),
                    std::to_string(s.max_probes_per_update), num(s.information_bits), exp.hash});
    json point = game_summary(gc, s);
    point["value"] = value;
    points.push_back(std::move(point));
    log << parameter << " = " << shown << ": success rate " << s.success_rate << "\n";
  }
  write_text(out / "sweep.csv", csv);
  write_json(out / "sweep.json", "sweep", exp, json{{"parameter", parameter}, {"points", points}});
  return audits ? kExitViolation : kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cell-probe simulator for non-adaptive turnstile sketches"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> threads;

  using Handler = int (*)(const ExperimentConfig&, const fs::path&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"verify-nonadaptive", "Check every configured sketch against its declared footprints", cmd_verify_nonadaptive},
      {"run-game", "Play the one-way game and write per-trial CSV plus a JSON summary", cmd_run_game},
      {"compress-demo", "Compare compressed and full messages on paired trials", cmd_compress_demo},
      {"cell-sample", "Sample a covering cell set from sketch footprints", cmd_cell_sample},
      {"bounds-report", "Evaluate lower-bound shape functions against measured sketches", cmd_bounds_report},
      {"sweep", "Run the game over a list of parameter values", cmd_sweep},
  };
  Handler chosen = nullptr;
  std::string chosen_name;
  for (const auto& [name, help, handler] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "Master seed (overrides PROBE_LAB_SEED and the config)");
    sub->add_option("--trials", trials, "Number of trials");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory");
    sub->callback([&chosen, &chosen_name, handler = handler, name = name] {
      chosen = handler;
      chosen_name = name;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot read config " + config_path);
    json file = json::parse(f);
    Overrides ov{seed, trials, threads, std::nullopt};
    if (const char* env = std::getenv("PROBE_LAB_SEED")) ov.env_seed = env;
    const ExperimentConfig exp = resolve(std::move(file), ov);
    return chosen(exp, fs::path(out_dir), err);
  } catch (const ContractViolation& e) {
    err << chosen_name << ": contract violation: " << e.what() << "\n";
    return kExitViolation;
  } catch (const json::exception& e) {
    err << chosen_name << ": config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << chosen_name << ": config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace probelab::cli
