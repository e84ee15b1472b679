#pragma once

#include <memory>
#include <vector>

#include "probelab/hash.hpp"
#include "probelab/sketch.hpp"

namespace probelab {

/// Rows used when SketchParams::d is 0: ceil(2.5 * lg(1/delta)), rounded up
/// to an odd count. The constant comes from the exact binomial tail of the
/// median with per-row failure 0.2, the worst rate observed for b = 6 on a
/// single-heavy-item stream.
unsigned default_rows(double delta);
inline constexpr double kRowsPerBit = 2.5;

/// Rows for the stable projection when d is 0: least odd d for which the
/// median of d absolute Cauchy draws leaves [1/2, 3/2] with probability at
/// most delta, from the exact binomial tails on either side.
unsigned stable_rows(double delta);

Wide median(std::vector<Wide> values);
double median(std::vector<double> values);

/// d x b table of counters with one pairwise bucket hash per row; the
/// estimate of an item is the median over rows of its counter.
class CountMedianTable {
 public:
  CountMedianTable() = default;
  CountMedianTable(CellRegion region, unsigned rows, unsigned buckets, unsigned counter_words, SketchSeed seed);

  static std::size_t words_required(unsigned rows, unsigned buckets, unsigned counter_words) {
    return std::size_t{rows} * buckets * counter_words;
  }

  unsigned rows() const { return rows_; }
  unsigned buckets() const { return buckets_; }
  std::size_t bucket(unsigned row, std::uint64_t item) const { return hashes_[row].bucket(item, buckets_); }

  void add(std::uint64_t item, Wide delta);
  Wide row_value(unsigned row, std::uint64_t item) const;
  Wide estimate(std::uint64_t item) const;
  void footprint(std::uint64_t item, std::vector<std::size_t>& cells) const;
  Wide capacity() const { return counters_.capacity(); }

 private:
  std::size_t slot(unsigned row, std::uint64_t item) const { return std::size_t{row} * buckets_ + bucket(row, item); }

  CounterArray counters_;
  std::vector<PairwiseHash> hashes_;
  unsigned rows_ = 0;
  unsigned buckets_ = 0;
};

/// Direct-address store of v: one counter per index. Exact on every query.
class ExactBaseline final : public Sketch {
 public:
  ExactBaseline(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);

  bool supports(Problem, int p) const override { return p == 1 || p == 2; }
  Wide safe_mass() const override { return counters_.capacity(); }

 protected:
  void apply(Index i, Wide delta) override { counters_.add(i, delta); }
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override { counters_.cells_of(i, cells); }
  std::size_t declared_update_probes() const override { return counters_.counter_words(); }
  Wide do_point_query(Index t) override { return counters_.get(t); }
  std::optional<Index> do_heavy_hitter() override;
  double do_norm(int p) override;
  std::optional<double> do_entropy() override;

 private:
  CounterArray counters_;
};

/// Count-Median point query sketch for the general turnstile model.
class CountMedianSketch final : public Sketch {
 public:
  CountMedianSketch(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);

  bool supports(Problem problem, int) const override { return problem == Problem::point_query; }
  Wide safe_mass() const override { return table_.capacity(); }
  const CountMedianTable& table() const { return table_; }

 protected:
  void apply(Index i, Wide delta) override { table_.add(i, delta); }
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override { table_.footprint(i, cells); }
  std::size_t declared_update_probes() const override;
  Wide do_point_query(Index t) override { return table_.estimate(t); }

 private:
  CountMedianTable table_;
  unsigned counter_words_;
};

/// One Count-Median table per dyadic level; heavy_hitter() walks the implicit
/// binary tree from the root, descending into the child with the larger
/// |estimate| (lower child on ties).
class DyadicHeavyHitter final : public Sketch {
 public:
  DyadicHeavyHitter(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);
  static unsigned levels_for(Index n);

  bool supports(Problem problem, int) const override {
    return problem == Problem::heavy_hitter || problem == Problem::point_query;
  }
  Wide safe_mass() const override { return levels_.front().capacity(); }

  unsigned levels() const { return static_cast<unsigned>(levels_.size()); }
  /// Probing estimate of v[t] from the leaf level.
  Wide leaf_estimate(Index t) { return levels_.back().estimate(t); }

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override;
  Wide do_point_query(Index t) override { return leaf_estimate(t); }
  std::optional<Index> do_heavy_hitter() override;

 private:
  std::vector<CountMedianTable> levels_;  // levels_[l] holds level l+1 (2^(l+1) nodes)
  unsigned depth_ = 0;
  unsigned counter_words_ = 1;
};

/// d rows x b buckets of signed counters (pairwise bucket hash, 4-wise sign
/// hash); ||v||_2^2 is the median over rows of the sum of squared counters.
class SignBucketL2 final : public Sketch {
 public:
  SignBucketL2(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);

  bool supports(Problem problem, int p) const override { return problem == Problem::lp_norm && p == 2; }
  Wide safe_mass() const override { return counters_.capacity(); }

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override { return std::size_t{rows_} * counters_.counter_words(); }
  double do_norm(int p) override;

 private:
  CounterArray counters_;
  std::vector<PairwiseHash> bucket_hashes_;
  std::vector<FourWiseHash> sign_hashes_;
  unsigned rows_;
  unsigned buckets_;
};

/// Cauchy (1-stable) projection: row r accumulates sum_i c(i, r) * v_i with
/// c(i, r) regenerated from (seed, i, r). ||v||_1 is the median of |row|,
/// since the median of |Cauchy| is 1.
class StableProjectionL1 final : public Sketch {
 public:
  /// Fixed-point fraction bits of the stored coefficients.
  static constexpr unsigned kScaleBits = 12;

  StableProjectionL1(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);
  static unsigned counter_words(unsigned w);

  bool supports(Problem problem, int p) const override { return problem == Problem::lp_norm && p == 1; }
  Wide safe_mass() const override;

  /// Quantized coefficient, |c| clamped to n^3 before scaling.
  Wide coefficient(Index i, unsigned row) const;
  double l1_estimate();

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override { return std::size_t{rows_} * counters_.counter_words(); }
  double do_norm(int p) override { return p == 1 ? l1_estimate() : Sketch::do_norm(p); }

 private:
  CounterArray counters_;
  std::vector<SketchSeed> row_seeds_;
  unsigned rows_;
  long double clamp_;
};

/// Plug-in entropy for sparse geometric streams: support from the leaf
/// estimates of a dyadic sketch, mass from a stable projection. Not a
/// worst-case entropy sketch.
class PluginEntropyEstimator final : public Sketch {
 public:
  PluginEntropyEstimator(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);

  bool supports(Problem problem, int p) const override;
  Wide safe_mass() const override;
  bool is_linear() const override { return false; }

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override;
  Wide do_point_query(Index t) override;
  std::optional<Index> do_heavy_hitter() override;
  double do_norm(int p) override;
  std::optional<double> do_entropy() override;

 private:
  std::unique_ptr<DyadicHeavyHitter> support_;
  std::unique_ptr<StableProjectionL1> mass_;
  double threshold_;
};

/// Test fixture: reads cell 0 and then probes cell (cell0 mod S), so its
/// probe set depends on memory contents.
class AdaptiveMock final : public Sketch {
 public:
  AdaptiveMock(const SketchParams& params, SketchSeed seed, CellRegion region);
  static std::size_t words_required(const SketchParams& params);

  bool supports(Problem problem, int) const override { return problem == Problem::point_query; }
  Wide safe_mass() const override { return static_cast<Wide>(memory().word_mask() >> 1); }
  bool is_linear() const override { return false; }

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override { return 2; }
  Wide do_point_query(Index t) override;

 private:
  std::size_t cells_;
};

/// alpha independent copies side by side. Numeric answers are the median of
/// the copies; heavy hitter is the majority (plurality, lowest index on ties).
/// For odd alpha a threshold test on the median equals the majority vote of
/// the per-copy threshold tests.
class AmplifiedSketch final : public Sketch {
 public:
  AmplifiedSketch(const SketchFactory& base, unsigned alpha, SketchSeed seed, CellRegion region);

  bool supports(Problem problem, int p) const override { return copies_.front()->supports(problem, p); }
  Wide safe_mass() const override;
  bool is_linear() const override { return copies_.front()->is_linear(); }
  unsigned alpha() const { return static_cast<unsigned>(copies_.size()); }
  Sketch& copy(unsigned c) { return *copies_.at(c); }

 protected:
  void apply(Index i, Wide delta) override;
  void collect_footprint(Index i, std::vector<std::size_t>& cells) const override;
  std::size_t declared_update_probes() const override { return copies_.size() * base_probes_; }
  Wide do_point_query(Index t) override;
  std::optional<Index> do_heavy_hitter() override;
  double do_norm(int p) override;
  std::optional<double> do_entropy() override;

 private:
  std::vector<std::unique_ptr<Sketch>> copies_;
  std::size_t base_probes_;
};

/// Composite factory of alpha copies: S' = alpha * S, t_u' = alpha * t_u.
/// Throws std::invalid_argument for even or zero alpha.
SketchFactory amplify(const SketchFactory& base, unsigned alpha);

}  // namespace probelab
