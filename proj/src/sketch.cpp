#include "probelab/sketch.hpp"

#include <algorithm>
#include <sstream>

#include "probelab/sketches.hpp"

namespace probelab {

std::string to_string(Problem p) {
  switch (p) {
    case Problem::point_query: return "point_query";
    case Problem::lp_norm: return "lp_norm";
    case Problem::entropy: return "entropy";
    case Problem::heavy_hitter: return "heavy_hitter";
  }
  return "unknown";
}

Problem parse_problem(const std::string& name) {
  if (name == "point_query") return Problem::point_query;
  if (name == "lp_norm") return Problem::lp_norm;
  if (name == "entropy") return Problem::entropy;
  if (name == "heavy_hitter") return Problem::heavy_hitter;
  throw std::invalid_argument("unknown problem: " + name);
}

void validate(const SketchDescriptor& d) {
  if (d.S == 0 || d.t_u == 0 || d.w == 0) throw std::invalid_argument(d.name + ": S, t_u and w must be positive");
  if (d.t_u > d.S) throw std::invalid_argument(d.name + ": t_u exceeds S");
  if (!(d.delta > 0.0 && d.delta < 0.5)) throw std::invalid_argument(d.name + ": delta must lie in (0, 1/2)");
}

Sketch::Sketch(std::string name, Index n, CellRegion region, SketchSeed seed, double delta, Wide magnitude_bound)
    : name_(std::move(name)),
      n_(n),
      region_(std::move(region)),
      seed_(seed),
      delta_(delta),
      magnitude_bound_(magnitude_bound) {
  if (n_ == 0) throw std::invalid_argument("dimension must be positive");
}

void Sketch::check_index(Index i) const {
  if (i >= n_) throw std::out_of_range(name_ + ": index " + std::to_string(i) + " outside [0, n)");
}

void Sketch::update(Index i, Wide delta) {
  check_index(i);
  if (wide_abs(delta) > magnitude_bound_) {
    throw std::out_of_range(name_ + ": |delta| = " + to_string(wide_abs(delta)) + " exceeds M = " +
                            to_string(magnitude_bound_));
  }
  auto scope = memory().open(OpKind::update);
  apply(i, delta);
}

UpdateFootprint Sketch::footprint(Index i) const {
  check_index(i);
  UpdateFootprint fp{i, {}};
  collect_footprint(i, fp.cells);
  std::sort(fp.cells.begin(), fp.cells.end());
  fp.cells.erase(std::unique(fp.cells.begin(), fp.cells.end()), fp.cells.end());
  return fp;
}

SketchDescriptor Sketch::declared() const {
  return SketchDescriptor{name_, n_, region_.size(), declared_update_probes(), memory().word_bits(), delta_};
}

Wide Sketch::point_query(Index t) {
  check_index(t);
  if (!supports(Problem::point_query)) throw UnsupportedQuery(name_ + " does not answer point queries");
  auto scope = memory().open(OpKind::query);
  return do_point_query(t);
}

std::optional<Index> Sketch::heavy_hitter() {
  if (!supports(Problem::heavy_hitter)) throw UnsupportedQuery(name_ + " does not answer heavy hitter queries");
  auto scope = memory().open(OpKind::query);
  return do_heavy_hitter();
}

double Sketch::norm(int p) {
  if ((p != 1 && p != 2) || !supports(Problem::lp_norm, p)) {
    throw UnsupportedQuery(name_ + " does not estimate the l" + std::to_string(p) + " norm");
  }
  auto scope = memory().open(OpKind::query);
  return do_norm(p);
}

std::optional<double> Sketch::entropy() {
  if (!supports(Problem::entropy)) throw UnsupportedQuery(name_ + " does not estimate entropy");
  auto scope = memory().open(OpKind::query);
  return do_entropy();
}

Wide Sketch::do_point_query(Index) { throw UnsupportedQuery(name_ + ": point query"); }
std::optional<Index> Sketch::do_heavy_hitter() { throw UnsupportedQuery(name_ + ": heavy hitter"); }
double Sketch::do_norm(int) { throw UnsupportedQuery(name_ + ": norm"); }
std::optional<double> Sketch::do_entropy() { throw UnsupportedQuery(name_ + ": entropy"); }

Wide SketchParams::effective_magnitude_bound() const {
  if (magnitude_bound > 0) return magnitude_bound;
  auto cube = checked_pow(static_cast<Wide>(n), 3);
  return cube ? *cube : kWideMax;
}

unsigned SketchParams::rows() const {
  if (d > 0) return d;
  return name == "stable_l1" ? stable_rows(delta) : default_rows(delta);
}

unsigned SketchParams::buckets() const {
  if (b > 0) return b;
  if (name == "sign_bucket_l2" || name == "adaptive_mock") return 16;
  return 6;
}

SketchFactory::SketchFactory(SketchParams params, std::size_t words, Builder builder)
    : params_(std::move(params)), words_(words), builder_(std::move(builder)) {}

std::unique_ptr<Sketch> SketchFactory::build(SketchSeed seed, CellRegion region) const {
  if (region.size() != words_) throw std::invalid_argument("region size does not match sketch size");
  return builder_(seed, std::move(region));
}

std::unique_ptr<Sketch> SketchFactory::make(SketchSeed seed) const {
  auto mem = std::make_shared<Memory>(words_, params_.w);
  return build(seed, CellRegion(mem, 0, words_));
}

namespace {

template <typename T>
SketchFactory factory_for(const SketchParams& params) {
  return SketchFactory(params, T::words_required(params), [params](SketchSeed seed, CellRegion region) {
    return std::unique_ptr<Sketch>(new T(params, seed.derive("sketch", params.seed), std::move(region)));
  });
}

}  // namespace

SketchFactory make_factory(const SketchParams& params) {
  if (params.n == 0) throw std::invalid_argument("n must be positive");
  if (params.w == 0 || params.w > 64) throw std::invalid_argument("w must be in [1, 64]");
  if (!(params.delta > 0.0 && params.delta < 0.5)) throw std::invalid_argument("delta must lie in (0, 1/2)");
  if (params.counter_bits == 0 || words_for_bits(params.counter_bits, params.w) * params.w > 128) {
    throw std::invalid_argument("counter_bits must round up to at most 128 bits of whole words");
  }
  if (params.alpha == 0 || params.alpha % 2 == 0) throw std::invalid_argument("alpha must be odd and positive");

  SketchParams base = params;
  base.alpha = 1;
  auto factory = [&]() -> SketchFactory {
    if (params.name == "exact") return factory_for<ExactBaseline>(base);
    if (params.name == "count_median") return factory_for<CountMedianSketch>(base);
    if (params.name == "dyadic_hh") return factory_for<DyadicHeavyHitter>(base);
    if (params.name == "sign_bucket_l2") return factory_for<SignBucketL2>(base);
    if (params.name == "stable_l1") return factory_for<StableProjectionL1>(base);
    if (params.name == "plugin_entropy") return factory_for<PluginEntropyEstimator>(base);
    if (params.name == "adaptive_mock") return factory_for<AdaptiveMock>(base);
    throw std::invalid_argument("unknown sketch: " + params.name);
  }();
  return params.alpha == 1 ? factory : amplify(factory, params.alpha);
}

SketchDescriptor measure(const Sketch& sketch) {
  SketchDescriptor d = sketch.declared();
  d.S = sketch.region().size();
  d.t_u = 0;
  for (Index i = 0; i < sketch.dimension(); ++i) d.t_u = std::max(d.t_u, sketch.footprint(i).cells.size());
  return d;
}

namespace {

std::vector<std::size_t> sorted(std::vector<std::size_t> cells) {
  std::sort(cells.begin(), cells.end());
  return cells;
}

std::string describe(const std::vector<std::size_t>& cells) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
  os << '}';
  return os.str();
}

}  // namespace

NonadaptiveReport verify_nonadaptive(const SketchFactory& factory, std::size_t trials, SketchSeed seed) {
  NonadaptiveReport report;
  report.sketch = factory.params().name;
  report.trials = trials;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const SketchSeed trial_seed = seed.derive("verify", trial);
    const SketchSeed sketch_seed = trial_seed.derive("sketch");
    auto sketch = factory.make(sketch_seed);
    Rng rng(trial_seed.derive("stream"));
    const Index n = sketch->dimension();
    const auto limit = static_cast<std::int64_t>(std::min<Wide>(1000, sketch->magnitude_bound()));

    const auto prior = rng.between(1, 64);
    for (std::int64_t k = 0; k < prior; ++k) sketch->update(rng.below(n), rng.between(-limit, limit));

    const Index i = rng.below(n);
    Wide delta = rng.between(-limit, limit);
    if (delta == 0) delta = 1;

    const std::uint64_t before = sketch->memory().touches();
    const UpdateFootprint fp = sketch->footprint(i);
    const bool footprint_pure = sketch->memory().touches() == before;

    sketch->update(i, delta);
    const auto loaded = sorted(sketch->memory().op_cells());

    auto fresh = factory.make(sketch_seed);
    fresh->update(i, delta);
    const auto empty = sorted(fresh->memory().op_cells());

    if (!footprint_pure || loaded != fp.cells || empty != fp.cells) {
      ++report.violations;
      if (report.details.size() < 8) {
        std::ostringstream os;
        os << report.sketch << " trial " << trial << " index " << i << ": footprint " << describe(fp.cells)
           << ", probed after prior stream " << describe(loaded) << ", probed on empty memory " << describe(empty)
           << (footprint_pure ? "" : ", footprint() probed memory");
        report.details.push_back(os.str());
      }
    }
  }
  return report;
}

}  // namespace probelab
