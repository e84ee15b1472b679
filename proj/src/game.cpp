#include "probelab/game.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "probelab/bounds.hpp"
#include "probelab/stats.hpp"

namespace probelab {

namespace {

Wide power(Wide C, unsigned j) {
  auto v = checked_pow(C, j);
  if (!v) throw ConfigError("C^" + std::to_string(j) + " overflows 127 bits");
  return *v;
}

std::uint64_t fold(std::uint64_t digest, std::uint64_t value) { return mix64(digest ^ mix64(value)); }

std::uint64_t fold_wide(std::uint64_t digest, Wide value) {
  const auto u = static_cast<UWide>(value);
  return fold(fold(digest, static_cast<std::uint64_t>(u)), static_cast<std::uint64_t>(u >> 64));
}

void note_update(Sketch& sketch, ProbeStats* stats) {
  if (!stats) return;
  ++stats->updates;
  stats->update_touches += sketch.memory().op_touches();
  stats->max_update_cells = std::max(stats->max_update_cells, sketch.memory().op_cells().size());
}

void tracked_update(Sketch& sketch, Index i, Wide delta, ProbeStats* stats) {
  sketch.update(i, delta);
  note_update(sketch, stats);
}

struct Answer {
  bool pass = false;
  std::uint64_t raw = 0;
};

Answer run_check(Sketch& sketch, Problem problem, int p, Index t, unsigned j, Wide C, ProbeStats* stats) {
  const Wide cj = power(C, j);
  Answer out;
  switch (problem) {
    case Problem::point_query: {
      const Wide est = sketch.point_query(t);
      if (stats) stats->query_touches += sketch.memory().op_touches();
      out.pass = 3 * est >= cj;
      out.raw = fold_wide(0, est);
      break;
    }
    case Problem::lp_norm: {
      tracked_update(sketch, t, -cj, stats);
      const double est = sketch.norm(p);
      if (stats) stats->query_touches += sketch.memory().op_touches();
      tracked_update(sketch, t, cj, stats);
      out.pass = 3.0L * est <= to_long_double(cj);
      out.raw = std::bit_cast<std::uint64_t>(est);
      break;
    }
    case Problem::entropy: {
      tracked_update(sketch, t, -cj, stats);
      const auto h = sketch.entropy();
      if (stats) stats->query_touches += sketch.memory().op_touches();
      tracked_update(sketch, t, cj, stats);
      out.pass = !h || *h <= 1.0 / 3.0;
      out.raw = h ? std::bit_cast<std::uint64_t>(*h) : ~std::uint64_t{0};
      break;
    }
    case Problem::heavy_hitter:
      throw std::invalid_argument("heavy hitter decoding does not scan");
  }
  return out;
}

}  // namespace

Wide GameConfig::magnitude_bound() const {
  if (M > 0) return M;
  auto cube = checked_pow(static_cast<Wide>(n), 3);
  return cube ? *cube : kWideMax;
}

SketchParams GameConfig::sketch_params() const {
  SketchParams params = sketch;
  params.n = n;
  params.magnitude_bound = magnitude_bound();
  return params;
}

std::uint64_t GameConfig::query_budget() const {
  return problem == Problem::heavy_hitter ? a : n * std::uint64_t{a};
}

void validate(const GameConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.n < 2) fail("n >= 2 violated");
  if (std::uint64_t{c.a} * c.a > c.n) {
    fail("a <= sqrt(n) violated: a = " + std::to_string(c.a) + ", n = " + std::to_string(c.n));
  }
  if (c.problem == Problem::lp_norm && c.p != 1 && c.p != 2) fail("p in {1, 2} violated: p = " + std::to_string(c.p));
  if (c.threads == 0) fail("threads >= 1 violated");
  if (c.problem == Problem::entropy) {
    if (c.C < 2) fail("C >= 2 violated for entropy");
    if (c.a > 0) {
      const EntropyMargins margins = entropy_threshold_validate(c.C, c.a);
      if (!margins.ok) fail("entropy margins violated for C = " + to_string(c.C) + ": " + margins.diagnostic);
    }
  } else if (c.C < 10) {
    fail("C >= 10 violated: C = " + to_string(c.C));
  }
  if (!checked_pow(c.C, c.a + 1)) fail("C^(a+1) must fit in 127 bits");
  const Wide top = *checked_pow(c.C, c.a);
  if (top > c.magnitude_bound()) {
    fail("C^a <= M violated: C^a = " + to_string(top) + ", M = " + to_string(c.magnitude_bound()));
  }

  SketchFactory factory = [&] {
    try {
      return make_factory(c.sketch_params());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sketch: ") + e.what());
    }
  }();
  auto probe = factory.make(SketchSeed(c.master_seed));
  if (!probe->supports(c.problem, c.p)) fail(probe->name() + " does not answer " + to_string(c.problem));
  // During a check the vector's l1 mass stays below 4 C^a.
  if (top > probe->safe_mass() / 4) fail("4 C^a <= counter capacity violated for " + probe->name());
}

AliceInput draw_input(Index n, unsigned a, SketchSeed seed) {
  if (a > n) throw std::invalid_argument("cannot draw more distinct indices than n");
  Rng rng(seed);
  AliceInput input;
  std::set<Index> seen;
  while (input.indices.size() < a) {
    const Index i = rng.below(n);
    if (seen.insert(i).second) input.indices.push_back(i);
  }
  return input;
}

IndexMap::IndexMap(std::vector<Index> forward) : forward_(std::move(forward)), inverse_(forward_.size()) {
  std::vector<bool> hit(forward_.size(), false);
  for (Index i = 0; i < forward_.size(); ++i) {
    const Index j = forward_[i];
    if (j >= forward_.size() || hit[j]) throw std::invalid_argument("index map is not a permutation");
    hit[j] = true;
    inverse_[j] = i;
  }
}

void alice_updates(Sketch& sketch, const AliceInput& input, Wide C, const IndexMap& map, ProbeStats* stats) {
  for (unsigned j = 1; j <= input.indices.size(); ++j) {
    tracked_update(sketch, map.to_sketch(input.indices[j - 1]), power(C, j), stats);
  }
}

Message alice_encode(Sketch& sketch, const AliceInput& input, Wide C, ProbeStats* stats) {
  alice_updates(sketch, input, C, {}, stats);
  const Memory& mem = sketch.memory();
  Message msg;
  msg.kind = Message::Kind::full;
  msg.payload = pack_words(mem.words(), mem.word_bits());
  msg.bit_count = mem.size() * std::uint64_t{mem.word_bits()};
  return msg;
}

std::unique_ptr<Sketch> receive(const Message& message, const SketchFactory& factory, SketchSeed coins) {
  if (message.kind != Message::Kind::full) throw std::invalid_argument("receive() takes full messages");
  auto sketch = factory.make(coins);
  Memory& mem = sketch->memory();
  if (message.bit_count != mem.size() * std::uint64_t{mem.word_bits()} ||
      message.payload.size() != (message.bit_count + 7) / 8) {
    throw std::invalid_argument("message size does not match the sketch");
  }
  const auto words = unpack_words(message.payload, mem.size(), mem.word_bits());
  for (std::size_t cell = 0; cell < words.size(); ++cell) mem.restore(cell, words[cell]);
  return sketch;
}

bool check_point_query(Sketch& sketch, Index t, unsigned j, Wide C) {
  return run_check(sketch, Problem::point_query, 1, t, j, C, nullptr).pass;
}

bool check_lp(Sketch& sketch, Index t, unsigned j, Wide C, int p) {
  return run_check(sketch, Problem::lp_norm, p, t, j, C, nullptr).pass;
}

bool check_entropy(Sketch& sketch, Index t, unsigned j, Wide C) {
  return run_check(sketch, Problem::entropy, 1, t, j, C, nullptr).pass;
}

bool exact_check(const SparseVector& v, Problem problem, int p, Index t, unsigned j, Wide C) {
  const Wide cj = power(C, j);
  switch (problem) {
    case Problem::point_query:
      return 3 * v.get(t) >= cj;
    case Problem::lp_norm: {
      SparseVector r = v;
      r.add(t, -cj);
      if (p == 1) return 3 * r.l1() <= cj;
      const long double c = to_long_double(cj);
      return 9 * r.l2_squared() <= c * c;
    }
    case Problem::entropy: {
      SparseVector r = v;
      r.add(t, -cj);
      const auto h = r.entropy();
      return !h || *h <= 1.0L / 3;
    }
    case Problem::heavy_hitter:
      return v.is_valid_heavy_hitter(t);
  }
  return false;
}

DecodeResult bob_decode(Sketch& sketch, const GameConfig& config, const AliceInput& truth, const IndexMap& map) {
  DecodeResult out;
  const Wide C = config.C;
  const unsigned a = static_cast<unsigned>(truth.indices.size());
  SparseVector exact(config.n);
  for (unsigned j = 1; j <= a; ++j) exact.add(truth.indices[j - 1], power(C, j));

  bool on_track = true;  // every level so far removed the true i_j
  for (unsigned j = a; j >= 1; --j) {
    const Wide cj = power(C, j);
    if (on_track) {
      const Wide l1 = exact.l1();
      if (l1 != (power(C, j + 1) - C) / (C - 1) || l1 >= 2 * cj) ++out.audit_violations;
      if (C >= 10 && exact.count_valid_heavy_hitters() != 1) ++out.audit_violations;
    }

    std::optional<Index> found;
    if (config.problem == Problem::heavy_hitter) {
      const auto h = sketch.heavy_hitter();
      out.probes.query_touches += sketch.memory().op_touches();
      ++out.queries_used;
      ++out.checks;
      if (h) found = map.from_sketch(*h);
      if (!found || !exact.is_valid_heavy_hitter(*found)) ++out.check_errors;
      out.raw_digest = fold(out.raw_digest, h ? *h : ~std::uint64_t{0});
      out.decision_digest = fold(out.decision_digest, found ? *found : ~std::uint64_t{0});
    } else {
      for (Index t = 0; t < config.n; ++t) {
        const Answer ans = run_check(sketch, config.problem, config.p, map.to_sketch(t), j, C, &out.probes);
        ++out.queries_used;
        ++out.checks;
        if (ans.pass != exact_check(exact, config.problem, config.p, t, j, C)) ++out.check_errors;
        out.raw_digest = fold(out.raw_digest, ans.raw);
        out.decision_digest = fold(out.decision_digest, ans.pass);
        if (!ans.pass) continue;
        if (!found) {
          found = t;
          if (!config.exhaustive) break;
        } else if (!out.ambiguous) {
          out.ambiguous = true;
          out.diagnostic = "level " + std::to_string(j) + ": indices " + std::to_string(*found) + " and " +
                           std::to_string(t) + " both pass Check";
        }
      }
    }

    if (!found) {
      out.diagnostic = "level " + std::to_string(j) + ": no index identified";
      break;
    }
    out.recovered.push_back(*found);
    tracked_update(sketch, map.to_sketch(*found), -cj, &out.probes);
    exact.add(*found, -cj);
    on_track = on_track && *found == truth.indices[j - 1];
  }

  std::vector<Index> expected(truth.indices.rbegin(), truth.indices.rend());
  out.success = out.recovered == expected && !out.ambiguous;
  if (!out.success && out.diagnostic.empty()) out.diagnostic = "recovered indices differ from Alice's input";
  return out;
}

SketchSeed trial_seed(const GameConfig& config, std::size_t id) {
  return SketchSeed(config.master_seed).derive("trial", id);
}

AliceInput trial_input(const GameConfig& config, std::size_t id) {
  return draw_input(config.n, config.a, trial_seed(config, id).derive("alice"));
}

SketchSeed trial_coins(const GameConfig& config, std::size_t id) { return trial_seed(config, id).derive("coins"); }

TrialRecord play_trial(const GameConfig& config, const SketchFactory& factory, std::size_t id) {
  const AliceInput input = trial_input(config, id);
  const SketchSeed coins = trial_coins(config, id);

  auto alice = factory.make(coins);
  alice->memory().set_recording(false);
  ProbeStats alice_probes;
  const Message msg = alice_encode(*alice, input, config.C, &alice_probes);

  auto bob = receive(msg, factory, coins);
  bob->memory().set_recording(false);
  const DecodeResult res = bob_decode(*bob, config, input);

  TrialRecord rec;
  rec.trial_id = id;
  rec.success = res.success;
  rec.queries_used = res.queries_used;
  rec.message_bits = msg.bit_count;
  rec.max_probes_per_update = std::max(alice_probes.max_update_cells, res.probes.max_update_cells);
  rec.checks = res.checks;
  rec.check_errors = res.check_errors;
  rec.audit_violations = res.audit_violations;
  rec.ambiguous = res.ambiguous;
  rec.decision_digest = res.decision_digest;
  return rec;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double log2_binomial(Index n, Index a) {
  if (a > n) return -std::numeric_limits<double>::infinity();
  a = std::min(a, n - a);
  long double s = 0;
  for (Index k = 1; k <= a; ++k) s += std::log2(static_cast<long double>(n - a + k) / k);
  return static_cast<double>(s);
}

GameStats run_game(const GameConfig& config) {
  validate(config);
  const SketchFactory factory = make_factory(config.sketch_params());

  GameStats stats;
  stats.trials.resize(config.trials);
  parallel_for(config.trials, config.threads,
               [&](std::size_t id) { stats.trials[id] = play_trial(config, factory, id); });

  long double bits = 0, queries = 0;
  for (const TrialRecord& r : stats.trials) {
    stats.successes += r.success ? 1 : 0;
    bits += r.message_bits;
    queries += r.queries_used;
    stats.max_probes_per_update = std::max(stats.max_probes_per_update, r.max_probes_per_update);
    stats.checks += r.checks;
    stats.check_errors += r.check_errors;
    stats.audit_violations += r.audit_violations;
    stats.ambiguous_trials += r.ambiguous ? 1 : 0;
  }
  const auto count = static_cast<double>(std::max<std::size_t>(1, config.trials));
  stats.success_rate = config.trials ? static_cast<double>(stats.successes) / count : 0;
  const Interval ci = wilson_interval(stats.successes, config.trials);
  stats.wilson_low = ci.low;
  stats.wilson_high = ci.high;
  stats.mean_message_bits = static_cast<double>(bits / count);
  stats.mean_queries = static_cast<double>(queries / count);
  stats.per_query_failure = stats.checks ? static_cast<double>(stats.check_errors) / stats.checks : 0;
  stats.query_budget = config.query_budget();
  stats.information_bits = log2_binomial(config.n, config.a);
  return stats;
}

}  // namespace probelab
