#include "probelab/sketches.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/distributions/binomial.hpp>

namespace probelab {

unsigned default_rows(double delta) {
  auto d = static_cast<unsigned>(std::ceil(kRowsPerBit * std::log2(1.0 / delta)));
  d = std::max(d, 1u);
  return d % 2 == 0 ? d + 1 : d;
}

unsigned stable_rows(double delta) {
  const double pi = std::numbers::pi;
  const double below = 2 / pi * std::atan(0.5);
  const double above = 1 - 2 / pi * std::atan(1.5);
  for (unsigned d = 1;; d += 2) {
    // the median is off when at least (d + 1) / 2 draws land on one side
    const double need = (d + 1) / 2 - 1;
    const double fail = cdf(complement(boost::math::binomial_distribution<>(d, below), need)) +
                        cdf(complement(boost::math::binomial_distribution<>(d, above), need));
    if (fail <= delta) return d;
  }
}

Wide median(std::vector<Wide> values) {
  if (values.empty()) return 0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const Wide hi = values[mid];
  const Wide lo = *std::max_element(values.begin(), values.begin() + mid);
  return lo / 2 + hi / 2 + (lo % 2 + hi % 2) / 2;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + values[mid]);
}

// ---------------------------------------------------------------- tables

CountMedianTable::CountMedianTable(CellRegion region, unsigned rows, unsigned buckets, unsigned counter_words,
                                   SketchSeed seed)
    : counters_(std::move(region), std::size_t{rows} * buckets, counter_words), rows_(rows), buckets_(buckets) {
  if (rows == 0 || buckets == 0) throw std::invalid_argument("count-median table needs rows and buckets");
  hashes_.reserve(rows);
  for (unsigned r = 0; r < rows; ++r) hashes_.emplace_back(seed.derive("row", r));
}

void CountMedianTable::add(std::uint64_t item, Wide delta) {
  for (unsigned r = 0; r < rows_; ++r) counters_.add(slot(r, item), delta);
}

Wide CountMedianTable::row_value(unsigned row, std::uint64_t item) const { return counters_.get(slot(row, item)); }

Wide CountMedianTable::estimate(std::uint64_t item) const {
  std::vector<Wide> rows(rows_);
  for (unsigned r = 0; r < rows_; ++r) rows[r] = row_value(r, item);
  return median(std::move(rows));
}

void CountMedianTable::footprint(std::uint64_t item, std::vector<std::size_t>& cells) const {
  for (unsigned r = 0; r < rows_; ++r) counters_.cells_of(slot(r, item), cells);
}

// ---------------------------------------------------------------- exact

ExactBaseline::ExactBaseline(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("exact", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      counters_(region, params.n, words_for_bits(params.counter_bits, params.w)) {}

std::size_t ExactBaseline::words_required(const SketchParams& params) {
  return CounterArray::words_required(params.n, words_for_bits(params.counter_bits, params.w));
}

std::optional<Index> ExactBaseline::do_heavy_hitter() {
  std::optional<Index> best;
  Wide best_abs = 0;
  for (Index i = 0; i < dimension(); ++i) {
    const Wide x = wide_abs(counters_.get(i));
    if (x > best_abs) {
      best = i;
      best_abs = x;
    }
  }
  return best;
}

double ExactBaseline::do_norm(int p) {
  // Below safe_mass() the l1 sum cannot overflow, so it is kept exact.
  Wide l1 = 0;
  long double squares = 0;
  for (Index i = 0; i < dimension(); ++i) {
    const Wide x = counters_.get(i);
    if (x == 0) continue;
    if (p == 1) {
      l1 += wide_abs(x);
    } else {
      const long double a = to_long_double(x);
      squares += a * a;
    }
  }
  return static_cast<double>(p == 1 ? to_long_double(l1) : std::sqrt(squares));
}

std::optional<double> ExactBaseline::do_entropy() {
  std::vector<long double> weights;
  long double total = 0;
  for (Index i = 0; i < dimension(); ++i) {
    const Wide x = counters_.get(i);
    if (x == 0) continue;
    weights.push_back(to_long_double(wide_abs(x)));
    total += weights.back();
  }
  if (weights.empty()) return std::nullopt;
  std::sort(weights.begin(), weights.end());
  long double h = 0;
  for (long double wgt : weights) h += (wgt / total) * std::log2(total / wgt);
  return static_cast<double>(h);
}

// ---------------------------------------------------------------- count-median

CountMedianSketch::CountMedianSketch(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("count_median", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      table_(region, params.rows(), params.buckets(), words_for_bits(params.counter_bits, params.w), seed),
      counter_words_(words_for_bits(params.counter_bits, params.w)) {}

std::size_t CountMedianSketch::words_required(const SketchParams& params) {
  return CountMedianTable::words_required(params.rows(), params.buckets(),
                                          words_for_bits(params.counter_bits, params.w));
}

std::size_t CountMedianSketch::declared_update_probes() const { return std::size_t{table_.rows()} * counter_words_; }

// ---------------------------------------------------------------- dyadic

unsigned DyadicHeavyHitter::levels_for(Index n) {
  unsigned levels = 0;
  while ((Index{1} << levels) < n) ++levels;
  return std::max(levels, 1u);
}

std::size_t DyadicHeavyHitter::words_required(const SketchParams& params) {
  return levels_for(params.n) * CountMedianTable::words_required(params.rows(), params.buckets(),
                                                                 words_for_bits(params.counter_bits, params.w));
}

DyadicHeavyHitter::DyadicHeavyHitter(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("dyadic_hh", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      depth_(levels_for(params.n)),
      counter_words_(words_for_bits(params.counter_bits, params.w)) {
  const std::size_t per_level = CountMedianTable::words_required(params.rows(), params.buckets(), counter_words_);
  levels_.reserve(depth_);
  for (unsigned l = 0; l < depth_; ++l) {
    levels_.emplace_back(region.sub(l * per_level, per_level), params.rows(), params.buckets(), counter_words_,
                         seed.derive("level", l + 1));
  }
}

void DyadicHeavyHitter::apply(Index i, Wide delta) {
  for (unsigned l = 0; l < depth_; ++l) levels_[l].add(i >> (depth_ - 1 - l), delta);
}

void DyadicHeavyHitter::collect_footprint(Index i, std::vector<std::size_t>& cells) const {
  for (unsigned l = 0; l < depth_; ++l) levels_[l].footprint(i >> (depth_ - 1 - l), cells);
}

std::size_t DyadicHeavyHitter::declared_update_probes() const {
  return std::size_t{depth_} * levels_.front().rows() * counter_words_;
}

std::optional<Index> DyadicHeavyHitter::do_heavy_hitter() {
  Index node = 0;
  for (unsigned l = 0; l < depth_; ++l) {
    const unsigned shift = depth_ - 1 - l;
    const Index left = 2 * node;
    const Index right = left + 1;
    const Wide left_est = wide_abs(levels_[l].estimate(left));
    const bool right_valid = (right << shift) < dimension();
    const Wide right_est = right_valid ? wide_abs(levels_[l].estimate(right)) : Wide{-1};
    if (l == 0 && left_est == 0 && right_est <= 0) return std::nullopt;
    node = right_est > left_est ? right : left;
  }
  return node;
}

// ---------------------------------------------------------------- l2

SignBucketL2::SignBucketL2(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("sign_bucket_l2", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      counters_(region, std::size_t{params.rows()} * params.buckets(), words_for_bits(params.counter_bits, params.w)),
      rows_(params.rows()),
      buckets_(params.buckets()) {
  for (unsigned r = 0; r < rows_; ++r) {
    bucket_hashes_.emplace_back(seed.derive("bucket", r));
    sign_hashes_.emplace_back(seed.derive("sign", r));
  }
}

std::size_t SignBucketL2::words_required(const SketchParams& params) {
  return CounterArray::words_required(std::size_t{params.rows()} * params.buckets(),
                                      words_for_bits(params.counter_bits, params.w));
}

void SignBucketL2::apply(Index i, Wide delta) {
  for (unsigned r = 0; r < rows_; ++r) {
    counters_.add(std::size_t{r} * buckets_ + bucket_hashes_[r].bucket(i, buckets_), sign_hashes_[r].sign(i) * delta);
  }
}

void SignBucketL2::collect_footprint(Index i, std::vector<std::size_t>& cells) const {
  for (unsigned r = 0; r < rows_; ++r) counters_.cells_of(std::size_t{r} * buckets_ + bucket_hashes_[r].bucket(i, buckets_), cells);
}

double SignBucketL2::do_norm(int) {
  std::vector<double> rows(rows_);
  for (unsigned r = 0; r < rows_; ++r) {
    long double acc = 0;
    for (unsigned k = 0; k < buckets_; ++k) {
      const long double c = to_long_double(counters_.get(std::size_t{r} * buckets_ + k));
      acc += c * c;
    }
    rows[r] = static_cast<double>(acc);
  }
  return std::sqrt(median(std::move(rows)));
}

// ---------------------------------------------------------------- l1

unsigned StableProjectionL1::counter_words(unsigned w) { return std::max(1u, 128 / w); }

std::size_t StableProjectionL1::words_required(const SketchParams& params) {
  return CounterArray::words_required(params.rows(), counter_words(params.w));
}

StableProjectionL1::StableProjectionL1(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("stable_l1", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      counters_(region, params.rows(), counter_words(params.w)),
      rows_(params.rows()) {
  const long double n = static_cast<long double>(params.n);
  clamp_ = n * n * n;
  for (unsigned r = 0; r < rows_; ++r) row_seeds_.push_back(seed.derive("cauchy", r));
}

Wide StableProjectionL1::coefficient(Index i, unsigned row) const {
  const std::uint64_t h = mix64(row_seeds_[row].value() ^ mix64(i + 0x632be59bd9b4e019ULL));
  const long double u = static_cast<long double>(h >> 11) * 0x1.0p-53L;
  long double c = std::tan(std::numbers::pi_v<long double> * (u - 0.5L));
  c = std::clamp(c, -clamp_, clamp_);
  return static_cast<Wide>(std::roundl(c * (1u << kScaleBits)));
}

Wide StableProjectionL1::safe_mass() const {
  const long double per_unit = clamp_ * static_cast<long double>(1u << kScaleBits);
  return static_cast<Wide>(to_long_double(counters_.capacity()) / per_unit);
}

void StableProjectionL1::apply(Index i, Wide delta) {
  for (unsigned r = 0; r < rows_; ++r) counters_.add(r, coefficient(i, r) * delta);
}

void StableProjectionL1::collect_footprint(Index, std::vector<std::size_t>& cells) const {
  for (unsigned r = 0; r < rows_; ++r) counters_.cells_of(r, cells);
}

double StableProjectionL1::l1_estimate() {
  std::vector<double> rows(rows_);
  for (unsigned r = 0; r < rows_; ++r) {
    rows[r] = static_cast<double>(to_long_double(wide_abs(counters_.get(r))) / (1u << kScaleBits));
  }
  return median(std::move(rows));
}

// ---------------------------------------------------------------- plug-in entropy

std::size_t PluginEntropyEstimator::words_required(const SketchParams& params) {
  return DyadicHeavyHitter::words_required(params) + StableProjectionL1::words_required(params);
}

PluginEntropyEstimator::PluginEntropyEstimator(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("plugin_entropy", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      threshold_(params.support_threshold) {
  const std::size_t support_words = DyadicHeavyHitter::words_required(params);
  support_ = std::make_unique<DyadicHeavyHitter>(params, seed.derive("support"), region.sub(0, support_words));
  mass_ = std::make_unique<StableProjectionL1>(params, seed.derive("mass"),
                                               region.sub(support_words, region.size() - support_words));
}

bool PluginEntropyEstimator::supports(Problem problem, int p) const {
  return problem == Problem::entropy || problem == Problem::heavy_hitter || problem == Problem::point_query ||
         (problem == Problem::lp_norm && p == 1);
}

Wide PluginEntropyEstimator::safe_mass() const { return std::min(support_->safe_mass(), mass_->safe_mass()); }

void PluginEntropyEstimator::apply(Index i, Wide delta) {
  support_->update(i, delta);
  mass_->update(i, delta);
}

void PluginEntropyEstimator::collect_footprint(Index i, std::vector<std::size_t>& cells) const {
  for (auto c : support_->footprint(i).cells) cells.push_back(c);
  for (auto c : mass_->footprint(i).cells) cells.push_back(c);
}

std::size_t PluginEntropyEstimator::declared_update_probes() const {
  return support_->declared().t_u + mass_->declared().t_u;
}

Wide PluginEntropyEstimator::do_point_query(Index t) { return support_->point_query(t); }
std::optional<Index> PluginEntropyEstimator::do_heavy_hitter() { return support_->heavy_hitter(); }
double PluginEntropyEstimator::do_norm(int p) { return mass_->norm(p); }

std::optional<double> PluginEntropyEstimator::do_entropy() {
  const double mass = mass_->l1_estimate();
  if (mass <= 0.0) return std::nullopt;
  std::vector<long double> weights;
  long double total = 0;
  for (Index t = 0; t < dimension(); ++t) {
    const long double est = to_long_double(wide_abs(support_->leaf_estimate(t)));
    if (est > 0 && est >= threshold_ * mass) {
      weights.push_back(est);
      total += est;
    }
  }
  if (weights.empty()) return 0.0;
  std::sort(weights.begin(), weights.end());
  long double h = 0;
  for (long double wgt : weights) h += (wgt / total) * std::log2(total / wgt);
  return static_cast<double>(h);
}

// ---------------------------------------------------------------- adaptive mock

AdaptiveMock::AdaptiveMock(const SketchParams& params, SketchSeed seed, CellRegion region)
    : Sketch("adaptive_mock", params.n, region, seed, params.delta, params.effective_magnitude_bound()),
      cells_(region.size()) {}

std::size_t AdaptiveMock::words_required(const SketchParams& params) { return params.buckets(); }

void AdaptiveMock::apply(Index i, Wide delta) {
  Memory& mem = memory();
  const std::uint64_t head = mem.read(region().global(0));
  mem.read(region().global(head % cells_));
  const std::size_t target = region().global(i % cells_);
  const std::uint64_t value = mem.read(target) + static_cast<std::uint64_t>(delta);
  mem.write(target, value & mem.word_mask());
}

void AdaptiveMock::collect_footprint(Index i, std::vector<std::size_t>& cells) const {
  cells.push_back(region().global(0));
  cells.push_back(region().global(i % cells_));
}

Wide AdaptiveMock::do_point_query(Index t) {
  const std::uint64_t raw = memory().read(region().global(t % cells_));
  return static_cast<Wide>(static_cast<std::int64_t>(raw));
}

// ---------------------------------------------------------------- amplification

AmplifiedSketch::AmplifiedSketch(const SketchFactory& base, unsigned alpha, SketchSeed seed, CellRegion region)
    : Sketch(base.params().name + "^" + std::to_string(alpha), base.params().n, region, seed, base.params().delta,
             base.params().effective_magnitude_bound()) {
  for (unsigned c = 0; c < alpha; ++c) {
    copies_.push_back(base.build(seed.derive("copy", c), region.sub(c * base.words(), base.words())));
  }
  base_probes_ = copies_.front()->declared().t_u;
}

Wide AmplifiedSketch::safe_mass() const {
  Wide m = kWideMax;
  for (const auto& c : copies_) m = std::min(m, c->safe_mass());
  return m;
}

void AmplifiedSketch::apply(Index i, Wide delta) {
  for (auto& c : copies_) c->update(i, delta);
}

void AmplifiedSketch::collect_footprint(Index i, std::vector<std::size_t>& cells) const {
  for (const auto& c : copies_) {
    for (auto cell : c->footprint(i).cells) cells.push_back(cell);
  }
}

Wide AmplifiedSketch::do_point_query(Index t) {
  std::vector<Wide> answers;
  for (auto& c : copies_) answers.push_back(c->point_query(t));
  return median(std::move(answers));
}

std::optional<Index> AmplifiedSketch::do_heavy_hitter() {
  std::map<std::optional<Index>, unsigned> votes;
  for (auto& c : copies_) ++votes[c->heavy_hitter()];
  std::optional<Index> best;
  unsigned best_votes = 0;
  for (const auto& [answer, count] : votes) {
    if (count > best_votes) {
      best = answer;
      best_votes = count;
    }
  }
  return best;
}

double AmplifiedSketch::do_norm(int p) {
  std::vector<double> answers;
  for (auto& c : copies_) answers.push_back(c->norm(p));
  return median(std::move(answers));
}

std::optional<double> AmplifiedSketch::do_entropy() {
  std::vector<double> answers;
  for (auto& c : copies_) {
    if (auto h = c->entropy()) answers.push_back(*h);
  }
  if (2 * answers.size() <= copies_.size()) return std::nullopt;
  return median(std::move(answers));
}

SketchFactory amplify(const SketchFactory& base, unsigned alpha) {
  if (alpha == 0 || alpha % 2 == 0) throw std::invalid_argument("amplification factor must be odd and positive");
  if (alpha == 1) return base;
  SketchParams params = base.params();
  params.alpha = alpha;
  return SketchFactory(params, base.words() * alpha, [base, alpha](SketchSeed seed, CellRegion region) {
    return std::unique_ptr<Sketch>(new AmplifiedSketch(base, alpha, seed.derive("amplified"), std::move(region)));
  });
}

}  // namespace probelab
