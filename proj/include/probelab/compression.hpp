#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probelab/game.hpp"

namespace probelab {

/// A set C of t_u cells and the indices I^C whose whole footprint lies in C.
struct CellSample {
  Index n = 0;
  std::size_t S = 0;
  std::size_t t_u = 0;
  std::vector<std::size_t> cells;  // sorted
  std::vector<Index> covered;      // sorted
  /// Padded footprint -> number of indices with that footprint.
  std::map<std::vector<std::size_t>, Index> class_census;

  /// |I^C| * C(S, t_u) >= n, in exact integers.
  bool certificate_holds() const;
  /// Membership mask of I^C over [n].
  std::vector<bool> covered_mask() const;
};

/// Pads footprints to t_u cells with the lowest unused cell indices, takes
/// the largest class (lexicographically smallest set on ties) as C and
/// collects every index whose footprint lies in C. Throws ContractViolation
/// when a footprint has more than t_u cells.
CellSample cell_sample(const std::vector<UpdateFootprint>& footprints, std::size_t t_u, std::size_t S);

/// Footprints of all indices of a sketch, t_u = measured maximum.
CellSample cell_sample(const Sketch& sketch);

struct Coverage {
  double exact = 0;        // C(m, a) / C(n, a)
  double lower_bound = 0;  // (m / (e n))^a
  std::string exact_fraction;  // reduced p/q
  bool vacuous = false;    // a > m
  /// exact >= lower_bound, decided with 100-digit arithmetic on the exact
  /// rational.
  bool dominates = false;
};

Coverage coverage_probability(Index n, Index m, Index a);

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Empty when a <= sqrt(n) and t_u <= (1/2) lg n / lg(eS/t_u) hold;
/// otherwise names the failed inequality.
std::string compression_precondition(Index n, unsigned a, std::size_t S, std::size_t t_u);

struct FamilySize {
  double p = 0;       // per-permutation success probability used
  double log2_k = 0;  // lg of the unrounded family size
  std::optional<std::uint64_t> k;  // nullopt when k >= 2^64
  std::string k_decimal;
  unsigned index_bits = 0;  // ceil(lg k)
};

/// k = ceil((1/p) a lg(en/a)) for a given p.
FamilySize family_size_for(double p, Index n, unsigned a);

/// Same with p = e^-a (eS/t_u)^(-t_u a) / 2; no precondition check.
FamilySize evaluate_family_size(Index n, unsigned a, std::size_t S, std::size_t t_u);

/// evaluate_family_size after checking compression_precondition; throws
/// PreconditionError with the failed inequality.
FamilySize required_family_size(Index n, unsigned a, std::size_t S, std::size_t t_u);

/// a lg e + t_u a lg(eS/t_u) + lg a + lg lg(en/a) + 2 t_u w + 1.
double compression_bound_bits(Index n, unsigned a, std::size_t S, std::size_t t_u, unsigned w);

/// ceil(lg k) + t_u (ceil(lg S) + w).
std::uint64_t compressed_bit_count(unsigned index_bits, std::size_t t_u, std::size_t S, unsigned w);

/// ceil(lg x) for x >= 1; 0 for x = 1.
unsigned ceil_log2(std::uint64_t x);

/// Permutations rho_0 .. rho_{k-1} of [n], each stored as a seed and
/// realized by a seeded Fisher-Yates shuffle. rho_0 is the identity when
/// identity_first is set.
class PermutationFamily {
 public:
  PermutationFamily(Index n, FamilySize size, SketchSeed seed, bool identity_first = true);

  Index n() const { return n_; }
  const FamilySize& size() const { return size_; }
  bool contains(std::uint64_t i) const { return !size_.k || i < *size_.k; }
  bool identity_first() const { return identity_first_; }
  std::uint64_t seed_of(std::uint64_t i) const;
  /// forward[x] = rho_i(x).
  std::vector<Index> realize(std::uint64_t i) const;

 private:
  Index n_;
  FamilySize size_;
  SketchSeed seed_;
  bool identity_first_;
};

/// Least i < min(k, scan_limit) with rho_i(indices) inside the mask.
std::optional<std::uint64_t> find_covering_permutation(const AliceInput& input, const PermutationFamily& family,
                                                        const std::vector<bool>& covered,
                                                        std::uint64_t scan_limit);

struct CompressedMessage {
  std::uint64_t perm_index = 0;
  unsigned index_bits = 0;
  unsigned address_bits = 0;
  unsigned w = 0;
  std::vector<std::pair<std::size_t, std::uint64_t>> cells;  // (address, contents), ascending address
  std::uint64_t bit_count = 0;
  std::vector<std::uint8_t> bytes;  // big-endian bit order, zero padded
};

class MalformedMessage : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Packs [perm_index][t_u x (address, contents)] MSB first.
std::vector<std::uint8_t> encode_message(const CompressedMessage& message);
/// Inverse of encode_message for the given layout.
CompressedMessage decode_message(const std::vector<std::uint8_t>& bytes, unsigned index_bits, std::size_t t_u,
                                 unsigned address_bits, unsigned w);

/// Alice runs the sketch on rho(input) and sends perm_index plus the
/// addresses and contents of the sampled cells. A probe outside the sample
/// throws ContractViolation.
CompressedMessage compress(const SketchFactory& factory, SketchSeed coins, const AliceInput& input, Wide C,
                           const PermutationFamily& family, std::uint64_t perm_index, const CellSample& sample);

/// Bob restores the sampled cells into a fresh sketch and decodes under
/// rho. Throws MalformedMessage when perm_index is outside the family.
DecodeResult decompress_and_answer(const CompressedMessage& message, const GameConfig& config,
                                   const AliceInput& truth, const PermutationFamily& family,
                                   const CellSample& sample, const SketchFactory& factory, SketchSeed coins);

/// Exact checks of pi(q(v)) = pi(q)(pi(v)) over random sparse v and random
/// pi. Heavy hitter compares by the guarantee predicate.
std::uint64_t permutation_invariance_check(Problem problem, std::size_t trials, SketchSeed seed);

struct CompressDemoOptions {
  std::uint64_t scan_limit = 1u << 16;
  bool identity_first = true;
};

struct CompressTrial {
  std::size_t trial_id = 0;
  bool covered = false;  // a covering permutation was found
  std::uint64_t perm_index = 0;
  bool full_success = false;
  bool compressed_success = false;
  /// Neither run disagreed with the exact oracle.
  bool non_erring = false;
  bool decisions_equal = false;
  bool raw_equal = false;
};

struct CompressDemoReport {
  std::string sketch;
  Index n = 0;
  unsigned a = 0;
  std::size_t S = 0;
  std::size_t t_u = 0;
  unsigned w = 0;
  std::size_t covered_indices = 0;
  bool certificate = false;
  bool precondition_met = false;
  std::string precondition_detail;
  FamilySize family;
  std::uint64_t full_bits = 0;
  std::uint64_t compressed_bits = 0;
  double bound_bits = 0;
  bool within_bound = false;
  Coverage coverage;  // single permutation, m = |I^C|
  double first_permutation_hit_rate = 0;  // rho_1 over trials, identity excluded
  std::vector<CompressTrial> trials;
  std::size_t covered_trials = 0;
  std::size_t non_erring_trials = 0;
  std::size_t equal_trials = 0;  // non-erring trials with equal decisions
  double equality_rate = 0;      // equal_trials / non_erring_trials
};

/// Paired full and compressed games with shared seeds. All trials share one
/// coin seed derived from the master seed, so the cell sample is fixed
/// before Alice sees her input; only the inputs vary across trials.
CompressDemoReport run_compress_demo(const GameConfig& config, const CompressDemoOptions& options);

}  // namespace probelab
