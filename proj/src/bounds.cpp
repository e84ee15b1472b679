#include "probelab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "probelab/compression.hpp"

namespace probelab {

namespace mp = boost::multiprecision;

void validate(const BoundParams& p) {
  if (p.n < 2) throw std::invalid_argument("bounds: n must be at least 2");
  if (p.S < 1) throw std::invalid_argument("bounds: S must be at least 1");
  if (p.k < 1) throw std::invalid_argument("bounds: k must be at least 1");
  if (!(p.c > 0)) throw std::invalid_argument("bounds: c must be positive");
  if (!(p.delta > 0 && p.delta <= 0.5)) throw std::invalid_argument("bounds: delta must lie in (0, 1/2]");
  const double floor = std::pow(static_cast<double>(p.n), -p.max_delta_exponent);
  if (p.delta < floor) throw std::invalid_argument("bounds: delta below n^-max_delta_exponent");
}

double randomized_shape(const BoundParams& p, double t) {
  const double space = std::log2(std::numbers::e * static_cast<double>(p.S) / t);
  const double bits = std::log2(1 / p.delta);
  const double first = std::sqrt(bits / space);
  const double lgk = std::log2(p.k);
  const double second = lgk > 0 ? bits / std::sqrt(lgk * space) : first;
  return p.c * std::min(first, second);
}

std::uint64_t randomized_bound(const BoundParams& p) {
  validate(p);
  // lg(eS/t) >= lg e > 1 on [1, S], so no t beyond c * sqrt(lg 1/delta) can
  // qualify; scanning up to that cap is the same as scanning all of [1, S].
  const double cap = p.c * std::sqrt(std::log2(1 / p.delta)) + 1;
  const std::uint64_t last = std::min<std::uint64_t>(p.S, static_cast<std::uint64_t>(cap));
  std::uint64_t best = 0;
  for (std::uint64_t t = 1; t <= last; ++t) {
    if (static_cast<double>(t) <= randomized_shape(p, static_cast<double>(t))) best = t;
  }
  return best;
}

std::uint64_t deterministic_bound(Index n, std::uint64_t S, double c) {
  if (S < 1) throw std::invalid_argument("bounds: S must be at least 1");
  const double target = c * std::log2(static_cast<double>(n));
  for (std::uint64_t t = 1; t <= S; ++t) {
    const double td = static_cast<double>(t);
    if (td * std::log2(std::numbers::e * static_cast<double>(S) / td) >= target) return t;
  }
  return S + 1;
}

double majority_failure(unsigned alpha, double delta) {
  if (alpha == 0 || alpha % 2 == 0) throw std::invalid_argument("alpha must be odd and positive");
  double total = 0;
  for (unsigned j = alpha / 2 + 1; j <= alpha; ++j) {
    total += boost::math::binomial_coefficient<double>(alpha, j) * std::pow(delta, j) * std::pow(1 - delta, alpha - j);
  }
  return total;
}

namespace {

using Float = mp::cpp_bin_float_50;

Float entropy_of(const std::vector<mp::cpp_int>& weights) {
  mp::cpp_int total = 0;
  for (const auto& x : weights) total += x;
  if (total == 0) return 0;
  const Float t(total);
  Float h = 0;
  for (const auto& x : weights) {
    if (x == 0) continue;
    const Float q = Float(x) / t;
    h -= q * mp::log2(q);
  }
  return h;
}

}  // namespace

EntropyMargins entropy_threshold_validate(Wide C, unsigned a) {
  if (C < 2 || a < 1) throw std::invalid_argument("entropy margins need C >= 2 and a >= 1");
  EntropyMargins m;
  m.worst_mismatch = std::numeric_limits<double>::infinity();
  const mp::cpp_int base = mp::cpp_int(to_string(C));
  std::vector<mp::cpp_int> powers{1};
  for (unsigned j = 1; j <= a; ++j) powers.push_back(powers.back() * base);

  for (unsigned j = 1; j <= a; ++j) {
    // Before Check(t, j) the vector is {i_l : C^l} for l = 1..j.
    std::vector<mp::cpp_int> residual(powers.begin() + 1, powers.begin() + j);
    const double match = static_cast<double>(entropy_of(residual));
    if (match > m.worst_match || m.worst_match_level == 0) {
      m.worst_match = match;
      m.worst_match_level = j;
    }

    std::vector<std::vector<mp::cpp_int>> mismatches;
    std::vector<mp::cpp_int> outside(powers.begin() + 1, powers.begin() + j + 1);
    outside.push_back(powers[j]);  // t unused: v[t] = -C^j
    mismatches.push_back(std::move(outside));
    for (unsigned l = 1; l < j; ++l) {
      std::vector<mp::cpp_int> hit(powers.begin() + 1, powers.begin() + j + 1);
      hit[l - 1] = powers[j] - powers[l];  // |C^l - C^j|
      mismatches.push_back(std::move(hit));
    }
    for (const auto& weights : mismatches) {
      const double h = static_cast<double>(entropy_of(weights));
      if (h < m.worst_mismatch) {
        m.worst_mismatch = h;
        m.worst_mismatch_level = j;
      }
    }
  }

  std::ostringstream os;
  if (m.worst_match >= kEntropyMatchLimit) {
    os << "residual entropy " << m.worst_match << " at level " << m.worst_match_level
       << " (case t = i_j) is not below 1/6";
  } else if (m.worst_mismatch <= kEntropyMismatchLimit) {
    os << "entropy " << m.worst_mismatch << " at level " << m.worst_mismatch_level
       << " (case t != i_j) is not above 2/3";
  }
  m.diagnostic = os.str();
  m.ok = m.diagnostic.empty();
  return m;
}

BoundRow bound_row(const SketchFactory& factory, SketchSeed seed, double k, double c) {
  auto sketch = factory.make(seed);
  const SketchDescriptor d = measure(*sketch);
  BoundRow row;
  row.sketch = d.name;
  row.n = d.n;
  row.S_measured = d.S;
  row.t_u_measured = d.t_u;
  row.det_bound = deterministic_bound(d.n, d.S, c);
  BoundParams p;
  p.n = d.n;
  p.S = d.S;
  p.w = d.w;
  p.delta = std::min(0.5, d.delta);
  p.k = k;
  p.c = c;
  row.rand_bound = randomized_bound(p);
  row.preconditions_met = compression_precondition(d.n, 1, d.S, d.t_u).empty();
  return row;
}

TrendCheck deterministic_trend(SpaceRegime regime, unsigned min_lg_n, unsigned max_lg_n, double c, double tolerance) {
  TrendCheck out;
  for (unsigned e = min_lg_n; e <= max_lg_n; ++e) {
    const Index n = Index{1} << e;
    const double lg = e;
    double growth = lg;
    std::uint64_t S = 0;
    if (regime == SpaceRegime::log_n) {
      S = e;
    } else {
      growth = lg / std::log2(lg);
      S = static_cast<std::uint64_t>(std::ceil(growth * growth));
    }
    const std::uint64_t t = deterministic_bound(n, S, c);
    out.n.push_back(n);
    out.t.push_back(t);
    out.ratio.push_back(static_cast<double>(t) / growth);
  }
  if (out.ratio.empty()) return out;
  double sum = 0;
  for (double r : out.ratio) sum += r;
  out.mean_ratio = sum / static_cast<double>(out.ratio.size());
  for (double r : out.ratio) out.max_deviation = std::max(out.max_deviation, std::abs(r / out.mean_ratio - 1));
  out.within_tolerance = out.max_deviation <= tolerance;
  return out;
}

}  // namespace probelab
