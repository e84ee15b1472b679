// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "probelab/bounds.hpp"
#include "probelab/compression.hpp"
#include "probelab/sketches.hpp"
#include "probelab/stats.hpp"

using namespace probelab;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kSigmas = 3.0;
constexpr double kTrendTolerance = 0.2;
constexpr double kBudgetNonadaptive = 10;      // seconds
constexpr double kBudgetExactRoundTrip = 30;
constexpr double kBudgetRealRoundTrip = 300;
constexpr double kBudgetCompression = 300;
constexpr std::size_t kNonadaptiveTrials = 100;
constexpr std::size_t kRoundTripTrials = 100;
constexpr std::size_t kSketchTrials = 1000;
constexpr std::size_t kInvarianceTrials = 1000;
constexpr std::size_t kAmplifyTrials = 1000;
constexpr std::size_t kCoverageTriplesMin = 100;

const std::string kGolden = PROBELAB_GOLDEN_DIR "/configs/";

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::uint64_t audits_seen = 0;  // carried from criteria 2 and 3 into 4

SketchParams sketch(const std::string& name, Index n, unsigned d = 0, unsigned b = 0, unsigned counter_bits = 64,
                    unsigned alpha = 1) {
  SketchParams p;
  p.name = name;
  p.n = n;
  p.d = d;
  p.b = b;
  p.counter_bits = counter_bits;
  p.alpha = alpha;
  return p;
}

std::vector<SketchParams> shipped(Index n) {
  return {sketch("exact", n),
          sketch("count_median", n, 5, 16),
          sketch("count_median", n),
          sketch("dyadic_hh", n, 3, 16),
          sketch("sign_bucket_l2", n, 5, 16),
          sketch("stable_l1", n, 0, 0, 128),
          sketch("plugin_entropy", n, 3, 16, 128),
          sketch("count_median", n, 1, 3, 64, 3)};
}

GameConfig game(Problem problem, const SketchParams& s, std::size_t trials, std::uint64_t seed) {
  GameConfig g;
  g.n = 1024;
  g.a = 8;
  g.C = problem == Problem::entropy ? 1024 : 10;
  if (problem == Problem::entropy) g.M = *checked_pow(1024, 8);
  g.problem = problem;
  g.sketch = s;
  g.trials = trials;
  g.master_seed = seed;
  return g;
}

void criterion1(Verdict& v) {
  std::size_t sketches = 0;
  for (const SketchParams& p : shipped(1024)) {
    const NonadaptiveReport r = verify_nonadaptive(make_factory(p), kNonadaptiveTrials, SketchSeed(101));
    ++sketches;
    v.require(r.violations == 0, r.sketch + " has " + std::to_string(r.violations) + " violations");
  }
  const NonadaptiveReport mock =
      verify_nonadaptive(make_factory(sketch("adaptive_mock", 1024)), kNonadaptiveTrials, SketchSeed(101));
  v.require(mock.violations > 0, "adaptive mock passed");
  v.detail << sketches << " sketches x " << kNonadaptiveTrials << " streams clean; mock flagged in " << mock.violations
           << "/" << mock.trials;
}

void criterion2(Verdict& v) {
  struct Case {
    const char* label;
    Problem problem;
    int p;
  };
  for (const Case& c : {Case{"point", Problem::point_query, 1}, Case{"l1", Problem::lp_norm, 1},
                        Case{"l2", Problem::lp_norm, 2}, Case{"heavy hitter", Problem::heavy_hitter, 1},
                        Case{"entropy", Problem::entropy, 1}}) {
    GameConfig g = game(c.problem, sketch("exact", 1024, 0, 0, c.problem == Problem::entropy ? 128 : 64),
                        kRoundTripTrials, 202);
    g.p = c.p;
    const GameStats s = run_game(g);
    audits_seen += s.audit_violations;
    v.require(s.success_rate == 1.0, std::string(c.label) + " success " + std::to_string(s.success_rate));
    v.detail << c.label << "=" << s.success_rate << " ";
  }
}

void criterion3(Verdict& v) {
  struct Case {
    const char* label;
    Problem problem;
    SketchParams params;
  };
  for (const Case& c : {Case{"count-median point", Problem::point_query, sketch("count_median", 1024, 7, 64)},
                        Case{"dyadic heavy hitter", Problem::heavy_hitter, sketch("dyadic_hh", 1024, 5, 32)}}) {
    const GameStats s = run_game(game(c.problem, c.params, kSketchTrials, 2024));
    audits_seen += s.audit_violations;
    const double k = static_cast<double>(s.query_budget);
    const double predicted = std::clamp(1.0 - k * s.per_query_failure, 0.0, 1.0);
    const double threshold = 1.0 - k * s.per_query_failure - kSigmas * bernoulli_sigma(predicted, kSketchTrials);
    v.require(s.success_rate >= threshold, std::string(c.label) + " below union bound");
    v.detail << c.label << " " << s.success_rate << " >= " << threshold << " (k=" << s.query_budget
             << ", delta^=" << s.per_query_failure << "); ";
  }
}

void criterion4(Verdict& v) {
  v.require(audits_seen == 0, std::to_string(audits_seen) + " audit violations during decoding");

  // closed form of the level mass, exactly
  std::size_t identities = 0;
  for (Wide C : {Wide{10}, Wide{1024}}) {
    Wide top = 1, sum = 0;
    for (unsigned j = 1; j <= 8; ++j) {
      top *= C;
      sum += top;
      v.require(sum == (top * C - C) / (C - 1) && sum < 2 * top, "level mass identity at j=" + std::to_string(j));
      ++identities;
    }
  }

  // heavy-hitter uniqueness for C = 10 on random geometric inputs
  std::size_t unique_levels = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const AliceInput in = draw_input(1024, 8, SketchSeed(404).derive("input", s));
    SparseVector x(1024);
    Wide power = 1;
    for (unsigned j = 1; j <= 8; ++j) {
      power *= 10;
      x.add(in.indices[j - 1], power);
      const bool unique = x.count_valid_heavy_hitters() == 1 && x.is_valid_heavy_hitter(in.indices[j - 1]);
      v.require(unique, "heavy hitter not unique");
      unique_levels += unique;
    }
  }

  const EntropyMargins m = entropy_threshold_validate(1024, 8);
  const double h13 = binary_entropy(1.0 / 3.0);
  v.require(m.worst_match < kEntropyMatchLimit, "match residual entropy " + std::to_string(m.worst_match));
  v.require(m.worst_mismatch > h13, "mismatch entropy " + std::to_string(m.worst_mismatch));
  v.detail << "audits=" << audits_seen << ", " << identities << " mass identities, " << unique_levels
           << " unique levels, entropy match max " << m.worst_match << " < 1/6, mismatch min " << m.worst_mismatch
           << " > H(1/3)=" << h13;
}

void criterion5(Verdict& v) {
  // (i) certificate on every shipped sketch
  std::size_t certificates = 0;
  for (Index n : {Index{1} << 10, Index{1} << 16}) {
    for (const SketchParams& p : shipped(n)) {
      const CellSample s = cell_sample(*make_factory(p).make(SketchSeed(505)));
      v.require(s.certificate_holds(), "certificate fails for " + p.name + " at n=" + std::to_string(n));
      ++certificates;
    }
  }

  // (ii) exact coverage dominates the lower bound
  std::size_t triples = 0;
  for (Index n : {16u, 64u, 256u, 1024u, 4096u}) {
    for (Index m : {Index{1}, Index{2}, n / 16, n / 4, n / 2, n}) {
      for (Index a : {1u, 2u, 3u, 4u, 6u, 8u}) {
        if (a > m || a * a > n) continue;
        ++triples;
        v.require(coverage_probability(n, m, a).dominates, "coverage below bound");
      }
    }
  }
  v.require(triples >= kCoverageTriplesMin, "coverage grid too small");

  // (iii) single-permutation hit rate
  const Index n = 64, m = 16;
  const unsigned a = 2;
  std::vector<bool> mask(n, false);
  for (Index x = 0; x < m; ++x) mask[3 * x + 1] = true;
  const Coverage cov = coverage_probability(n, m, a);
  const PermutationFamily fam(n, family_size_for(0.01, n, a), SketchSeed(506), false);
  const std::size_t mc = 5000;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < mc; ++s) {
    const AliceInput in = draw_input(n, a, SketchSeed(507).derive("input", s));
    const auto rho = fam.realize(s % 101);
    bool ok = true;
    for (Index i : in.indices) ok = ok && mask[rho[i]];
    hits += ok;
  }
  const double rate = static_cast<double>(hits) / mc;
  v.require(std::fabs(rate - cov.exact) <= kSigmas * bernoulli_sigma(cov.exact, mc), "hit rate off coverage");

  // (iv) paired runs on the heavy-hitter golden config and the identity toy
  GameConfig hh;
  hh.n = 256;
  hh.a = 1;
  hh.problem = Problem::heavy_hitter;
  hh.sketch = sketch("dyadic_hh", 256, 1, 16);
  hh.trials = 500;
  hh.master_seed = 7;
  const CompressDemoReport r = run_compress_demo(hh, {});
  v.require(r.non_erring_trials > 0 && r.equal_trials == r.non_erring_trials, "compressed answers differ");
  v.require(std::fabs(r.first_permutation_hit_rate - r.coverage.exact) <=
                kSigmas * bernoulli_sigma(r.coverage.exact, r.trials.size()),
            "golden hit rate off coverage");

  GameConfig toy;
  toy.n = 2;
  toy.a = 1;
  toy.M = 1000;
  toy.sketch = sketch("exact", 2);
  toy.trials = 50;
  toy.master_seed = 3;
  const CompressDemoReport t = run_compress_demo(toy, {});
  v.require(t.equality_rate == 1.0 && t.non_erring_trials == toy.trials, "identity toy unequal");

  // (v) bit counts against the closed form
  std::size_t grid = 0;
  for (unsigned lg_n = 30; lg_n <= 63; ++lg_n) {
    for (std::size_t S : {2u, 3u, 4u, 8u}) {
      for (std::size_t tu : {1u, 2u}) {
        for (unsigned aa : {1u, 2u, 4u}) {
          const Index nn = Index{1} << lg_n;
          if (!compression_precondition(nn, aa, S, tu).empty()) continue;
          const FamilySize f = required_family_size(nn, aa, S, tu);
          for (unsigned w : {8u, 32u, 64u}) {
            ++grid;
            v.require(static_cast<double>(compressed_bit_count(f.index_bits, tu, S, w)) <=
                          compression_bound_bits(nn, aa, S, tu, w),
                      "bit count above bound");
          }
        }
      }
    }
  }
  v.require(grid > 0, "no configuration meets the preconditions");
  for (const CompressDemoReport* g : {&r, &t}) v.require(g->within_bound, "golden config above bound");
  SketchParams big = sketch("dyadic_hh", Index{1} << 16, 4, 32);
  big.w = 32;
  const SketchDescriptor bd = make_factory(big).make(SketchSeed(1))->declared();
  const FamilySize bf = evaluate_family_size(big.n, 4, bd.S, bd.t_u);
  const std::uint64_t big_bits = compressed_bit_count(bf.index_bits, bd.t_u, bd.S, 32);
  v.require(big_bits < std::uint64_t{bd.S} * 32, "n=2^16 dyadic not smaller");
  v.require(static_cast<double>(big_bits) <= compression_bound_bits(big.n, 4, bd.S, bd.t_u, 32),
            "n=2^16 dyadic above bound");
  v.require(r.compressed_bits < r.full_bits, "golden compressed not below S*w");

  v.detail << certificates << " certificates; " << triples << " coverage triples; hit rate " << rate << " vs "
           << cov.exact << "; equal " << r.equal_trials << "/" << r.non_erring_trials << " non-erring (golden), "
           << t.equal_trials << "/" << t.non_erring_trials << " (toy); " << grid << " grid points within bound; "
           << r.compressed_bits << " < " << r.full_bits << " bits";
}

void criterion6(Verdict& v) {
  for (Problem p : {Problem::point_query, Problem::lp_norm, Problem::entropy, Problem::heavy_hitter}) {
    const std::uint64_t bad = permutation_invariance_check(p, kInvarianceTrials, SketchSeed(606));
    v.require(bad == 0, to_string(p) + " has " + std::to_string(bad) + " violations");
    v.detail << to_string(p) << "=" << bad << " ";
  }
}

void criterion7(Verdict& v) {
  const SketchParams base = sketch("count_median", 1024, 1, 3);
  const SketchFactory amplified = make_factory(sketch("count_median", 1024, 1, 3, 64, 3));
  const Wide C = 10;
  std::size_t copy_fail = 0, majority_fail = 0, mismatched_votes = 0;
  for (std::size_t s = 0; s < kAmplifyTrials; ++s) {
    auto sk = amplified.make(SketchSeed(707).derive("trial", s));
    auto& amp = dynamic_cast<AmplifiedSketch&>(*sk);
    // one item; a copy's bucket for t holds C exactly when t collides with it
    const AliceInput in = draw_input(1024, 2, SketchSeed(708).derive("input", s));
    amp.update(in.indices[0], C);
    const Index t = in.indices[1];
    // a copy fails when its check wrongly passes: 3 est >= C
    unsigned votes = 0;
    for (unsigned c = 0; c < 3; ++c) votes += 3 * amp.copy(c).point_query(t) >= C;
    copy_fail += votes;
    const bool median_fail = 3 * amp.point_query(t) >= C;
    majority_fail += median_fail;
    mismatched_votes += median_fail != (votes >= 2);
  }
  const double f = static_cast<double>(copy_fail) / (3.0 * kAmplifyTrials);
  const double predicted = majority_failure(3, f);
  const double measured = static_cast<double>(majority_fail) / kAmplifyTrials;
  v.require(std::fabs(measured - predicted) <= kSigmas * bernoulli_sigma(predicted, kAmplifyTrials),
            "majority failure off prediction");
  v.require(mismatched_votes == 0, "median threshold differs from majority vote");

  std::size_t multiplied = 0;
  for (const SketchParams& p : {base, sketch("count_median", 1024, 4, 16), sketch("dyadic_hh", 1024, 2, 8),
                                sketch("sign_bucket_l2", 1024, 3, 8)}) {
    const SketchDescriptor one = measure(*make_factory(p).make(SketchSeed(1)));
    for (unsigned alpha : {3u, 5u}) {
      SketchParams q = p;
      q.alpha = alpha;
      const SketchDescriptor many = measure(*make_factory(q).make(SketchSeed(1)));
      v.require(many.S == alpha * one.S && many.t_u == alpha * one.t_u, "descriptor not multiplied for " + p.name);
      ++multiplied;
    }
  }
  v.detail << "per-copy f=" << f << ", majority " << measured << " vs 3f^2(1-f)+f^3=" << predicted << " (sigma "
           << bernoulli_sigma(predicted, kAmplifyTrials) << "); " << multiplied << " (S, t_u) pairs scale by alpha";
}

void criterion8(Verdict& v) {
  for (auto [label, regime] : {std::pair{"lg n", SpaceRegime::log_n},
                               std::pair{"lg n / lg lg n", SpaceRegime::log_over_loglog_squared}}) {
    const TrendCheck t = deterministic_trend(regime, 10, 30, 1, kTrendTolerance);
    v.require(t.within_tolerance, std::string("trend ") + label);
    v.detail << label << " max deviation " << t.max_deviation << "; ";
  }
  const std::uint64_t t = deterministic_bound(Index{1} << 20, 20, 1);
  v.require(t == 7, "deterministic_bound(2^20, 20, 1) = " + std::to_string(t));
  v.detail << "deterministic_bound(2^20, 20, 1) = " << t;
}

std::string slurp_without_timestamp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::string line, out;
  while (std::getline(f, line)) {
    if (line.find("\"generated_at\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

void criterion9(Verdict& v) {
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"verify-nonadaptive", "verify_all"},   {"verify-nonadaptive", "verify_empty"},
      {"run-game", "exact_point_query"},       {"run-game", "exact_l1"},
      {"run-game", "exact_l2"},                {"run-game", "exact_heavy_hitter"},
      {"run-game", "exact_entropy"},           {"run-game", "count_median_point"},
      {"run-game", "dyadic_hh_game"},          {"run-game", "amplified_cm"},
      {"compress-demo", "hh_compress"},        {"compress-demo", "toy_identity"},
      {"cell-sample", "cell_sample"},          {"bounds-report", "bounds"},
      {"bounds-report", "bounds_empty"},       {"sweep", "sweep_cm_rows"},
  };
  const fs::path root = fs::temp_directory_path() / "probelab_acceptance";
  fs::remove_all(root);
  std::size_t files = 0;
  std::ostringstream sink;
  for (const auto& [command, config] : runs) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / config / std::to_string(rep);
      const std::string cfg = kGolden + config + ".json";
      const std::string out = dir.string();
      const char* argv[] = {"probelab", command.c_str(), "--config", cfg.c_str(), "--out", out.c_str()};
      const int code = cli::run(6, argv, sink, sink);
      v.require(code == cli::kExitOk, config + " exited " + std::to_string(code));
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const fs::path twin = dirs[1] / entry.path().filename();
      const bool same = fs::exists(twin) && slurp_without_timestamp(entry.path()) == slurp_without_timestamp(twin);
      v.require(same, config + "/" + entry.path().filename().string() + " differs");
      ++files;
    }
  }
  v.detail << runs.size() << " golden configs, " << files << " output files identical across two runs";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds, 0 for none
    std::function<void(Verdict&)> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "non-adaptivity suite", kBudgetNonadaptive, criterion1},
      {2, "round trip, exact oracle", kBudgetExactRoundTrip, criterion2},
      {3, "round trip, real sketches", kBudgetRealRoundTrip, criterion3},
      {4, "exact identities per level", 0, criterion4},
      {5, "compression machinery", kBudgetCompression, criterion5},
      {6, "permutation invariance", 0, criterion6},
      {7, "amplification", 0, criterion7},
      {8, "bound trends", 0, criterion8},
      {9, "determinism", 0, criterion9},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget > 0) v.require(secs < c.budget, "runtime over " + std::to_string(c.budget) + " s");
    failed += !v.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
