#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probelab/memory.hpp"
#include "probelab/seed.hpp"
#include "probelab/wide.hpp"

namespace probelab {

using Index = std::uint64_t;

enum class Problem { point_query, lp_norm, entropy, heavy_hitter };

std::string to_string(Problem p);
Problem parse_problem(const std::string& name);

struct SketchDescriptor {
  std::string name;
  Index n = 0;
  std::size_t S = 0;
  std::size_t t_u = 0;
  unsigned w = 64;
  double delta = 0.1;

  friend bool operator==(const SketchDescriptor&, const SketchDescriptor&) = default;
};

/// Throws std::invalid_argument unless S, t_u, w are positive, t_u <= S and
/// delta lies in (0, 1/2).
void validate(const SketchDescriptor& d);

/// Cells probed by update(index, *). Sorted, no duplicates.
struct UpdateFootprint {
  Index index = 0;
  std::vector<std::size_t> cells;

  friend bool operator==(const UpdateFootprint&, const UpdateFootprint&) = default;
};

class UnsupportedQuery : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A sketch broke its own cost-model contract (e.g. probed outside a
/// promised cell set).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A non-adaptive turnstile sketch living in a region of a Memory.
///
/// All cell access goes through the region, so every probe is logged. The
/// public entry points open an operation scope on the memory and validate
/// arguments; subclasses implement the protected hooks.
class Sketch {
 public:
  virtual ~Sketch() = default;
  Sketch(const Sketch&) = delete;
  Sketch& operator=(const Sketch&) = delete;

  const std::string& name() const { return name_; }
  Index dimension() const { return n_; }
  Memory& memory() { return region_.memory(); }
  const Memory& memory() const { return region_.memory(); }
  const CellRegion& region() const { return region_; }
  SketchSeed seed() const { return seed_; }
  /// M: largest accepted |delta| per update.
  Wide magnitude_bound() const { return magnitude_bound_; }
  double declared_delta() const { return delta_; }

  void update(Index i, Wide delta);
  /// Pure function of (i, seed); performs no probes.
  UpdateFootprint footprint(Index i) const;
  SketchDescriptor declared() const;

  virtual bool supports(Problem problem, int p = 1) const = 0;
  Wide point_query(Index t);
  /// nullopt when the sketch sees an all-zero vector.
  std::optional<Index> heavy_hitter();
  double norm(int p);
  /// Entropy in bits of |v_i| / ||v||_1; nullopt for the zero vector.
  std::optional<double> entropy();

  /// Largest ||v||_1 for which no counter can wrap.
  virtual Wide safe_mass() const = 0;
  virtual bool is_linear() const { return true; }

 protected:
  Sketch(std::string name, Index n, CellRegion region, SketchSeed seed, double delta, Wide magnitude_bound);

  void check_index(Index i) const;

  virtual void apply(Index i, Wide delta) = 0;
  virtual void collect_footprint(Index i, std::vector<std::size_t>& cells) const = 0;
  virtual std::size_t declared_update_probes() const = 0;

  virtual Wide do_point_query(Index t);
  virtual std::optional<Index> do_heavy_hitter();
  virtual double do_norm(int p);
  virtual std::optional<double> do_entropy();

 private:
  std::string name_;
  Index n_;
  CellRegion region_;
  SketchSeed seed_;
  double delta_;
  Wide magnitude_bound_;
};

/// Configuration block shared by every sketch kind: {name, n, d, b, w,
/// delta, seed} plus the counter width, magnitude bound and amplification
/// factor.
struct SketchParams {
  std::string name = "exact";
  Index n = 1024;
  unsigned d = 0;  // 0: derive from delta via the default table
  unsigned b = 0;  // 0: kind default
  unsigned w = 64;
  double delta = 0.1;
  std::uint64_t seed = 0;
  unsigned counter_bits = 64;
  unsigned alpha = 1;
  Wide magnitude_bound = 0;  // 0: n^3
  double support_threshold = 1e-3;  // plugin entropy only

  Wide effective_magnitude_bound() const;
  unsigned rows() const;
  unsigned buckets() const;
};

/// Builds sketches of one configuration into caller-provided regions, or
/// into fresh memories via make().
class SketchFactory {
 public:
  using Builder = std::function<std::unique_ptr<Sketch>(SketchSeed, CellRegion)>;

  SketchFactory(SketchParams params, std::size_t words, Builder builder);

  const SketchParams& params() const { return params_; }
  std::size_t words() const { return words_; }
  unsigned word_bits() const { return params_.w; }

  std::unique_ptr<Sketch> build(SketchSeed seed, CellRegion region) const;
  std::unique_ptr<Sketch> make(SketchSeed seed) const;

 private:
  SketchParams params_;
  std::size_t words_;
  Builder builder_;
};

/// Factory for a named sketch kind. Throws std::invalid_argument on unknown
/// names or invalid parameters. alpha > 1 wraps the result in amplify().
SketchFactory make_factory(const SketchParams& params);

/// Measured S (allocated words) and t_u (max footprint over all indices).
SketchDescriptor measure(const Sketch& sketch);

struct NonadaptiveReport {
  std::string sketch;
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::vector<std::string> details;  // first few offending cases
};

/// Replays random prior streams and compares the probed cell set of a fresh
/// update against footprint(i). Violations are counted, never thrown.
NonadaptiveReport verify_nonadaptive(const SketchFactory& factory, std::size_t trials, SketchSeed seed);

}  // namespace probelab
