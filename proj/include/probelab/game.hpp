#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "probelab/exact.hpp"
#include "probelab/sketch.hpp"

namespace probelab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One instance family of the one-way game: Alice holds a distinct indices
/// and adds C^j to the j-th; Bob recovers them from the sketch memory.
struct GameConfig {
  Index n = 1024;
  unsigned a = 8;
  Wide C = 10;
  Problem problem = Problem::point_query;
  int p = 1;  // lp_norm only
  SketchParams sketch;  // sketch.n and sketch.magnitude_bound are taken from n and M
  std::size_t trials = 100;
  std::uint64_t master_seed = 0;
  Wide M = 0;  // 0: n^3
  /// Keep scanning after the first passing t to detect ambiguous levels.
  bool exhaustive = false;
  unsigned threads = 1;

  Wide magnitude_bound() const;
  /// Sketch parameters with n and M filled in.
  SketchParams sketch_params() const;
  /// k: n * a for scan decoders, a for heavy-hitter decode.
  std::uint64_t query_budget() const;
};

/// Throws ConfigError naming the violated constraint.
void validate(const GameConfig& config);

struct AliceInput {
  std::vector<Index> indices;  // i_1, ..., i_a
};

/// a distinct indices drawn uniformly without replacement.
AliceInput draw_input(Index n, unsigned a, SketchSeed seed);

struct Message {
  enum class Kind { full, compressed };
  Kind kind = Kind::full;
  std::vector<std::uint8_t> payload;
  std::uint64_t bit_count = 0;
};

/// Probe totals for one side of a trial.
struct ProbeStats {
  std::uint64_t updates = 0;
  std::uint64_t update_touches = 0;
  std::size_t max_update_cells = 0;
  std::uint64_t query_touches = 0;
};

/// Relabeling applied to every index Bob (or Alice) sends to the sketch.
/// Default constructed: identity.
class IndexMap {
 public:
  IndexMap() = default;
  explicit IndexMap(std::vector<Index> forward);

  bool is_identity() const { return forward_.empty(); }
  Index to_sketch(Index i) const { return forward_.empty() ? i : forward_[i]; }
  Index from_sketch(Index i) const { return inverse_.empty() ? i : inverse_[i]; }

 private:
  std::vector<Index> forward_;
  std::vector<Index> inverse_;
};

/// Applies v[map(i_j)] += C^j for j = 1..a.
void alice_updates(Sketch& sketch, const AliceInput& input, Wide C, const IndexMap& map = {},
                   ProbeStats* stats = nullptr);

/// Runs alice_updates and ships the full memory image (S * w bits).
Message alice_encode(Sketch& sketch, const AliceInput& input, Wide C, ProbeStats* stats = nullptr);

/// Bob's copy: a fresh sketch from the shared seed with the image restored.
std::unique_ptr<Sketch> receive(const Message& message, const SketchFactory& factory, SketchSeed coins);

/// Point-query estimate of v[t] is at least C^j / 3.
bool check_point_query(Sketch& sketch, Index t, unsigned j, Wide C);
/// ||v - C^j e_t||_p estimate is at most C^j / 3; the subtract and re-add are
/// real updates.
bool check_lp(Sketch& sketch, Index t, unsigned j, Wide C, int p);
/// Entropy estimate of v - C^j e_t is at most 1/3; a zero vector counts as 0.
bool check_entropy(Sketch& sketch, Index t, unsigned j, Wide C);

/// The same predicates evaluated on an exact vector.
bool exact_check(const SparseVector& v, Problem problem, int p, Index t, unsigned j, Wide C);

struct DecodeResult {
  std::vector<Index> recovered;  // i_a first
  bool success = false;
  std::uint64_t queries_used = 0;
  ProbeStats probes;  // Bob's side
  /// Query answers that disagreed with the exact oracle on the true state.
  std::uint64_t checks = 0;
  std::uint64_t check_errors = 0;
  /// Level identity or heavy-hitter uniqueness failures on the exact state.
  std::uint64_t audit_violations = 0;
  bool ambiguous = false;
  std::string diagnostic;
  /// Digest of every decision (check outcomes, recovered indices).
  std::uint64_t decision_digest = 0;
  /// Digest of every raw answer value as returned by the sketch.
  std::uint64_t raw_digest = 0;
};

/// Bob's side of the game. `truth` feeds only the exact oracle, the audits
/// and the success flag; decoding itself never reads it. Indices sent to the
/// sketch pass through map, returned indices through its inverse.
DecodeResult bob_decode(Sketch& sketch, const GameConfig& config, const AliceInput& truth, const IndexMap& map = {});

struct TrialRecord {
  std::size_t trial_id = 0;
  bool success = false;
  std::uint64_t queries_used = 0;
  std::uint64_t message_bits = 0;
  std::size_t max_probes_per_update = 0;
  std::uint64_t checks = 0;
  std::uint64_t check_errors = 0;
  std::uint64_t audit_violations = 0;
  bool ambiguous = false;
  std::uint64_t decision_digest = 0;
};

struct GameStats {
  std::vector<TrialRecord> trials;
  std::size_t successes = 0;
  double success_rate = 0;
  double wilson_low = 0;
  double wilson_high = 0;
  double mean_message_bits = 0;
  double mean_queries = 0;
  std::size_t max_probes_per_update = 0;
  std::uint64_t checks = 0;
  std::uint64_t check_errors = 0;
  /// check_errors / checks: the measured per-query failure rate.
  double per_query_failure = 0;
  std::uint64_t audit_violations = 0;
  std::size_t ambiguous_trials = 0;
  std::uint64_t query_budget = 0;
  /// lg C(n, a): bits a reliable message has to carry.
  double information_bits = 0;
};

/// Seeds of trial `id`: Alice's indices and the shared sketch coins.
SketchSeed trial_seed(const GameConfig& config, std::size_t id);
AliceInput trial_input(const GameConfig& config, std::size_t id);
SketchSeed trial_coins(const GameConfig& config, std::size_t id);

TrialRecord play_trial(const GameConfig& config, const SketchFactory& factory, std::size_t id);

/// Validates, then plays config.trials independent trials on config.threads
/// threads. Records are ordered by trial id whatever the thread count.
GameStats run_game(const GameConfig& config);

/// lg C(n, a).
double log2_binomial(Index n, Index a);

/// Runs body(i) for i in [0, count) on up to `threads` threads.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace probelab
