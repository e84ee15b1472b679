#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probelab/sketch.hpp"

namespace probelab {

/// Inputs of the update-time lower-bound shape functions. Every hidden
/// constant is the single explicit c.
struct BoundParams {
  Index n = 1024;
  std::uint64_t S = 1;
  unsigned w = 64;
  double delta = 0.1;
  double k = 1;  // number of queries
  double c = 1;
  /// delta may not drop below n^-max_delta_exponent.
  double max_delta_exponent = 16;
};

/// Throws std::invalid_argument naming the failed condition.
void validate(const BoundParams& params);

/// c * min{ sqrt(lg(1/delta) / lg(eS/t)), lg(1/delta) / sqrt(lg k * lg(eS/t)) }.
double randomized_shape(const BoundParams& params, double t);

/// Largest t in [1, S] with t <= randomized_shape(params, t); 0 when none.
std::uint64_t randomized_bound(const BoundParams& params);

/// Least t in [1, S] with t * lg(eS/t) >= c * lg n; S + 1 when none.
std::uint64_t deterministic_bound(Index n, std::uint64_t S, double c = 1);

/// Probability that more than alpha/2 of alpha independent copies fail, each
/// with probability delta.
double majority_failure(unsigned alpha, double delta);

struct EntropyMargins {
  bool ok = false;
  /// Largest residual entropy over levels when t = i_j (must stay < 1/6).
  double worst_match = 0;
  unsigned worst_match_level = 0;
  /// Smallest entropy over levels and t != i_j cases (must stay > 2/3).
  double worst_mismatch = 0;
  unsigned worst_mismatch_level = 0;
  std::string diagnostic;
};

inline constexpr double kEntropyMatchLimit = 1.0 / 6.0;
inline constexpr double kEntropyMismatchLimit = 2.0 / 3.0;

/// Evaluates, for every level j <= a of the geometric stream with base C,
/// the entropy seen by Check(t, j) in both cases, with 50-digit arithmetic.
/// The t != i_j case ranges over t = i_l for l < j and t outside the stream.
EntropyMargins entropy_threshold_validate(Wide C, unsigned a);

struct BoundRow {
  std::string sketch;
  Index n = 0;
  std::uint64_t S_measured = 0;
  std::uint64_t t_u_measured = 0;
  std::uint64_t det_bound = 0;
  std::uint64_t rand_bound = 0;
  bool preconditions_met = false;
};

/// Measures the sketch built by factory (seeded by seed) and evaluates both
/// bounds at its measured S with delta and k as given.
BoundRow bound_row(const SketchFactory& factory, SketchSeed seed, double k, double c = 1);

/// Max ratio over min ratio of t(n) / g(n) over the sweep, where g is the
/// claimed growth rate; also reports whether every ratio lies within
/// `tolerance` of the mean ratio.
struct TrendCheck {
  std::vector<Index> n;
  std::vector<std::uint64_t> t;
  std::vector<double> ratio;
  double mean_ratio = 0;
  double max_deviation = 0;  // max |ratio / mean - 1|
  bool within_tolerance = false;
};

enum class SpaceRegime { log_n, log_over_loglog_squared };

TrendCheck deterministic_trend(SpaceRegime regime, unsigned min_lg_n, unsigned max_lg_n, double c = 1,
                               double tolerance = 0.2);

}  // namespace probelab
