#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "probelab/bounds.hpp"
#include "probelab/exact.hpp"

using namespace probelab;

namespace {

// Least t with t lg(eS/t) >= c lg n, by plain scan.
std::uint64_t scan_deterministic(double lg_n, std::uint64_t S, double c) {
  for (std::uint64_t t = 1; t <= S; ++t) {
    if (t * std::log2(M_E * S / t) >= c * lg_n) return t;
  }
  return S + 1;
}

// Largest t in [1, S] with t <= c min{...}, scanning every t.
std::uint64_t scan_randomized(double lg_inv_delta, double lg_k, std::uint64_t S, double c) {
  std::uint64_t best = 0;
  for (std::uint64_t t = 1; t <= S; ++t) {
    const double l = std::log2(M_E * S / t);
    double shape = std::sqrt(lg_inv_delta / l);
    if (lg_k > 0) shape = std::min(shape, lg_inv_delta / std::sqrt(lg_k * l));
    if (t <= c * shape) best = t;
  }
  return best;
}

nlohmann::json golden() {
  std::ifstream f(PROBELAB_GOLDEN_DIR "/bounds.json");
  REQUIRE(f.good());
  return nlohmann::json::parse(f);
}

}  // namespace

TEST_CASE("deterministic bound at n = 2^20, S = 20") {
  CHECK(deterministic_bound(Index{1} << 20, 20, 1) == 7);
  CHECK(6 * std::log2(M_E * 20 / 6) < 20);
  CHECK(7 * std::log2(M_E * 20 / 7) >= 20);
  CHECK(scan_deterministic(20, 20, 1) == 7);
}

TEST_CASE("deterministic bound against a plain scan") {
  for (unsigned lg_n = 2; lg_n <= 40; lg_n += 3) {
    for (std::uint64_t S : {1u, 2u, 5u, 16u, 100u, 4096u}) {
      for (double c : {0.5, 1.0, 2.0}) {
        CHECK(deterministic_bound(Index{1} << lg_n, S, c) == scan_deterministic(lg_n, S, c));
      }
    }
  }
}

TEST_CASE("randomized bound against a plain scan") {
  for (double lg_inv_delta : {1.0, 4.0, 20.0, 60.0}) {
    for (std::uint64_t S : {1u, 10u, 1000u, 100000u}) {
      for (double k : {1.0, 1024.0, 8388608.0}) {
        BoundParams p;
        p.n = Index{1} << 20;
        p.S = S;
        p.delta = std::exp2(-lg_inv_delta);
        p.k = k;
        if (lg_inv_delta > 16 * 20) continue;
        CHECK(randomized_bound(p) == scan_randomized(lg_inv_delta, std::log2(k), S, 1.0));
      }
    }
  }
}

TEST_CASE("randomized bound at delta = 1/2 is at most c") {
  BoundParams p;
  p.delta = 0.5;
  p.S = 1000;
  CHECK(randomized_bound(p) <= 1);
  p.c = 3;
  CHECK(randomized_bound(p) <= 3);
}

TEST_CASE("more space never raises the randomized bound") {
  // once S is past the cap t <= S
  BoundParams p;
  p.n = Index{1} << 20;
  p.delta = std::exp2(-30);
  p.k = 1024;
  p.c = 4;
  p.S = 64;
  REQUIRE(randomized_bound(p) < p.S);
  std::uint64_t last = std::numeric_limits<std::uint64_t>::max();
  for (std::uint64_t S = 64; S <= (std::uint64_t{1} << 24); S *= 2) {
    p.S = S;
    const std::uint64_t t = randomized_bound(p);
    CHECK(t <= last);
    last = t;
  }
}

TEST_CASE("pinned randomized bound") {
  BoundParams p;
  p.n = Index{1} << 20;
  p.S = Index{1} << 20;
  p.delta = std::exp2(-20);
  p.k = static_cast<double>(p.n) * 8;
  const std::uint64_t t = randomized_bound(p);
  CHECK(t == scan_randomized(20, std::log2(p.k), p.S, 1));
  CHECK(t == golden()["randomized_n2^20_S2^20_delta2^-20_k8n"].get<std::uint64_t>());
}

TEST_CASE("bound parameters are validated") {
  BoundParams p;
  p.delta = 0.7;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.delta = 1e-300;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.delta = 0.1;
  p.S = 0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("majority failure of independent copies") {
  CHECK(majority_failure(3, 0.3) == doctest::Approx(3 * 0.09 * 0.7 + 0.027));
  CHECK(majority_failure(3, 0.3) == doctest::Approx(0.216));
  CHECK(majority_failure(1, 0.2) == doctest::Approx(0.2));
  // five copies: at least three fail
  const double f = 0.1;
  const double five = 10 * std::pow(f, 3) * std::pow(1 - f, 2) + 5 * std::pow(f, 4) * (1 - f) + std::pow(f, 5);
  CHECK(majority_failure(5, f) == doctest::Approx(five));
}

TEST_CASE("entropy margins at C = 1024") {
  const EntropyMargins m = entropy_threshold_validate(1024, 8);
  CHECK(m.ok);
  CHECK(m.worst_match < kEntropyMatchLimit);
  CHECK(m.worst_mismatch > binary_entropy(1.0 / 3.0));

  // residual at level j is {C, ..., C^{j-1}}; recompute the worst one directly
  double worst = 0;
  for (unsigned j = 2; j <= 8; ++j) {
    std::vector<long double> w;
    for (unsigned l = 1; l < j; ++l) w.push_back(std::pow(1024.0L, l));
    worst = std::max(worst, static_cast<double>(entropy_bits(w)));
  }
  CHECK(m.worst_match == doctest::Approx(worst).epsilon(1e-12));

  // wrong guess outside the stream at j = 2: {C, C^2, -C^2}
  std::vector<long double> outside = {1024.0L, 1048576.0L, 1048576.0L};
  CHECK(static_cast<double>(entropy_bits(outside)) >= m.worst_mismatch - 1e-12);
}

TEST_CASE("small bases fail the entropy margins") {
  const EntropyMargins m = entropy_threshold_validate(2, 8);
  CHECK_FALSE(m.ok);
  CHECK(m.worst_match > kEntropyMatchLimit);
  CHECK_FALSE(m.diagnostic.empty());
}

TEST_CASE("deterministic bound grows with lg n at S = lg n") {
  const TrendCheck t = deterministic_trend(SpaceRegime::log_n, 10, 30);
  CHECK(t.n.size() == 21);
  CHECK(t.within_tolerance);
  CHECK(t.max_deviation <= 0.2);
  for (std::size_t k = 0; k < t.n.size(); ++k) {
    const double lg = std::log2(static_cast<double>(t.n[k]));
    CHECK(t.t[k] == scan_deterministic(lg, static_cast<std::uint64_t>(std::ceil(lg)), 1));
  }
}

TEST_CASE("deterministic bound tracks lg n / lg lg n at the squared space") {
  const TrendCheck t = deterministic_trend(SpaceRegime::log_over_loglog_squared, 10, 30);
  CHECK(t.within_tolerance);
  for (std::size_t k = 0; k < t.n.size(); ++k) {
    const double lg = std::log2(static_cast<double>(t.n[k]));
    const double g = lg / std::log2(lg);
    CHECK(t.ratio[k] == doctest::Approx(static_cast<double>(t.t[k]) / g));
  }
}
