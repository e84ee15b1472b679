#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "probelab/game.hpp"

namespace probelab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

/// Command-line overrides layered over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> threads;
  /// Value of PROBE_LAB_SEED, if set. --seed wins over it.
  std::optional<std::string> env_seed;
};

/// Effective experiment config: the file with overrides applied. `config`
/// is what gets embedded in outputs; threads are left out of it (and of the
/// hash) because they never change results.
struct ExperimentConfig {
  json config;
  std::uint64_t master_seed = 0;
  std::size_t trials = 100;
  unsigned threads = 1;
  std::string hash;
  bool timestamp = true;
};

/// Throws ConfigError on schema problems.
ExperimentConfig resolve(json file, const Overrides& overrides);

/// FNV-1a over the compact dump, as 16 hex digits.
std::string config_hash(const json& config);

SketchParams parse_sketch(const json& j);
GameConfig parse_game(const json& j, const ExperimentConfig& exp);
Wide parse_wide_value(const json& j);

/// RFC-4180 field quoting.
std::string csv_field(std::string_view text);
std::string csv_row(const std::vector<std::string>& fields);

int cmd_verify_nonadaptive(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);
int cmd_run_game(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);
int cmd_compress_demo(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);
int cmd_cell_sample(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);
int cmd_bounds_report(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);
int cmd_sweep(const ExperimentConfig& exp, const std::filesystem::path& out, std::ostream& log);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace probelab::cli
