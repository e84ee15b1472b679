#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using namespace probelab;
using namespace probelab::cli;
namespace fs = std::filesystem;

namespace {

const std::string kGolden = PROBELAB_GOLDEN_DIR "/configs/";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "probelab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("probelab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string without_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find("\"generated_at\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("csv quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_row({"x", "y,z"}) == "x,\"y,z\"\r\n");
}

TEST_CASE("config hash is stable and sensitive") {
  const json a = json::parse(R"({"schema_version":1,"master_seed":1})");
  const json b = json::parse(R"({"master_seed":1,"schema_version":1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  const json c = json::parse(R"({"schema_version":1,"master_seed":2})");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("seed precedence") {
  const json file = json::parse(R"({"schema_version":1,"master_seed":5,"trials":3,"threads":4})");
  CHECK(resolve(file, {}).master_seed == 5);
  CHECK(resolve(file, {std::nullopt, std::nullopt, std::nullopt, "9"}).master_seed == 9);
  CHECK(resolve(file, {7, std::nullopt, std::nullopt, "9"}).master_seed == 7);
  CHECK_THROWS_AS(resolve(file, {std::nullopt, std::nullopt, std::nullopt, "nine"}), ConfigError);

  const ExperimentConfig exp = resolve(file, {std::nullopt, 11, 2, std::nullopt});
  CHECK(exp.trials == 11);
  CHECK(exp.threads == 2);
  CHECK_FALSE(exp.config.contains("threads"));
  CHECK(exp.config["trials"] == 11);
  // thread count never changes the hash
  CHECK(resolve(file, {std::nullopt, 11, 1, std::nullopt}).hash == exp.hash);
}

TEST_CASE("schema problems are config errors") {
  CHECK_THROWS_AS(resolve(json::parse(R"({"master_seed":1})"), {}), ConfigError);
  CHECK_THROWS_AS(resolve(json::parse(R"({"schema_version":2})"), {}), ConfigError);
  CHECK_THROWS_AS(resolve(json::parse(R"({"schema_version":1,"bogus":1})"), {}), ConfigError);
  CHECK_THROWS_AS(parse_sketch(json::parse(R"({"name":"exact","rows":3})")), ConfigError);
  CHECK(parse_wide_value(json("1024^8")) == (Wide{1} << 80));
  CHECK(parse_wide_value(json(12)) == 12);
  CHECK_THROWS_AS(parse_wide_value(json("2^200")), ConfigError);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(invoke({"verify-nonadaptive", "--config", kGolden + "verify_empty.json", "--out", dir.string()}).code == 0);
  const json empty = read_json(dir / "verify_nonadaptive.json");
  CHECK(empty["results"]["reports"].empty());

  const Run bad = invoke({"verify-nonadaptive", "--config", kGolden + "verify_adversarial.json", "--out", dir.string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("adaptive_mock") != std::string::npos);

  const Run c2 = invoke({"run-game", "--config", kGolden + "entropy_c2.json", "--out", dir.string()});
  CHECK(c2.code == 2);
  CHECK(c2.err.find("entropy") != std::string::npos);

  CHECK(invoke({"run-game", "--config", (dir / "missing.json").string()}).code == 2);
  CHECK(invoke({"no-such-command"}).code == 2);
  CHECK(invoke({"run-game"}).code == 2);
  CHECK(invoke({"run-game", "--config", kGolden + "exact_l1.json", "--threads", "0"}).code == 2);
  const fs::path broken = write_config(dir, "{ not json");
  CHECK(invoke({"run-game", "--config", broken.string(), "--out", dir.string()}).code == 2);
}

TEST_CASE("run-game writes a CSV row per trial and a summary") {
  const fs::path dir = scratch("game");
  const Run r = invoke({"run-game", "--config", kGolden + "exact_point_query.json", "--trials", "5", "--out",
                        dir.string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "game_trials.csv");
  std::istringstream lines(csv);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] ==
        "trial_id,problem,n,a,C,success,queries_used,message_bits,max_probes_per_update,config_hash\r");
  const json summary = read_json(dir / "game_summary.json");
  CHECK(summary["results"]["success_rate"] == 1.0);
  CHECK(summary["results"]["mean_message_bits"] == 1024.0 * 64);
  CHECK(rows[1].find(summary["config_hash"].get<std::string>()) != std::string::npos);
  CHECK(summary["config"]["trials"] == 5);
}

TEST_CASE("compress-demo flags unmet preconditions and reports equality") {
  const fs::path dir = scratch("compress");
  REQUIRE(invoke({"compress-demo", "--config", kGolden + "toy_identity.json", "--out", dir.string()}).code == 0);
  const json r = read_json(dir / "compress_demo.json")["results"];
  CHECK(r["equality_rate"] == 1.0);
  CHECK(r["bound_status"] == "precondition unmet");
  CHECK(r["compressed_bits"].get<int>() < r["full_bits"].get<int>());
}

TEST_CASE("bounds-report with an empty sweep writes headers only") {
  const fs::path dir = scratch("bounds");
  REQUIRE(invoke({"bounds-report", "--config", kGolden + "bounds_empty.json", "--out", dir.string()}).code == 0);
  CHECK(slurp(dir / "bounds_sweep.csv") == "n,S,delta,k,det_bound,rand_bound,config_hash\r\n");
  CHECK(slurp(dir / "bounds.csv") ==
        "sketch,n,S_measured,t_u_measured,det_bound,rand_bound,preconditions_met,config_hash\r\n");
  const json s = read_json(dir / "bounds_summary.json");
  CHECK(s["results"]["trends"]["S = lg n"]["within_tolerance"] == true);
}

TEST_CASE("environment seed overrides the config") {
  const fs::path a = scratch("env_a"), b = scratch("env_b");
  setenv("PROBE_LAB_SEED", "4242", 1);
  REQUIRE(invoke({"run-game", "--config", kGolden + "exact_l1.json", "--trials", "2", "--out", a.string()}).code == 0);
  REQUIRE(invoke({"run-game", "--config", kGolden + "exact_l1.json", "--trials", "2", "--seed", "17", "--out",
                  b.string()})
              .code == 0);
  unsetenv("PROBE_LAB_SEED");
  CHECK(read_json(a / "game_summary.json")["config"]["master_seed"] == 4242);
  CHECK(read_json(b / "game_summary.json")["config"]["master_seed"] == 17);
}

TEST_CASE("repeat runs are byte identical apart from the timestamp") {
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  for (const fs::path& d : {a, b}) {
    REQUIRE(invoke({"sweep", "--config", kGolden + "sweep_cm_rows.json", "--trials", "20", "--out", d.string()}).code ==
            0);
  }
  CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
  CHECK(without_timestamp(slurp(a / "sweep.json")) == without_timestamp(slurp(b / "sweep.json")));
  CHECK(slurp(a / "sweep.json").find("\"config_hash\"") != std::string::npos);
}
