#include "probelab/exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace probelab {

void SparseVector::add(Index i, Wide delta) {
  if (i >= n_) throw std::out_of_range("index outside [0, n)");
  Wide& slot = entries_[i];
  slot += delta;
  if (slot == 0) entries_.erase(i);
}

Wide SparseVector::get(Index i) const {
  auto it = entries_.find(i);
  return it == entries_.end() ? 0 : it->second;
}

Wide SparseVector::l1() const {
  Wide s = 0;
  for (const auto& [i, x] : entries_) s += wide_abs(x);
  return s;
}

Wide SparseVector::linf() const {
  Wide m = 0;
  for (const auto& [i, x] : entries_) m = std::max(m, wide_abs(x));
  return m;
}

long double SparseVector::l2_squared() const {
  std::vector<long double> sq;
  sq.reserve(entries_.size());
  for (const auto& [i, x] : entries_) {
    const long double a = to_long_double(x);
    sq.push_back(a * a);
  }
  std::sort(sq.begin(), sq.end());
  long double s = 0;
  for (long double x : sq) s += x;
  return s;
}

long double SparseVector::norm(int p) const {
  if (p == 1) return to_long_double(l1());
  if (p == 2) return std::sqrt(l2_squared());
  throw std::invalid_argument("only p = 1 and p = 2 are supported");
}

long double entropy_bits(std::vector<long double> weights) {
  std::sort(weights.begin(), weights.end());
  long double total = 0;
  for (long double x : weights) total += x;
  if (total <= 0) throw std::invalid_argument("entropy of a zero weight vector");
  long double h = 0;
  for (long double x : weights) {
    if (x <= 0) continue;
    const long double q = x / total;
    h -= q * std::log2(q);
  }
  return h;
}

std::optional<long double> SparseVector::entropy() const {
  if (entries_.empty()) return std::nullopt;
  std::vector<long double> weights;
  weights.reserve(entries_.size());
  for (const auto& [i, x] : entries_) weights.push_back(to_long_double(wide_abs(x)));
  return entropy_bits(std::move(weights));
}

double binary_entropy(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1 - x) * std::log2(1 - x);
}

std::optional<Index> SparseVector::heavy_hitter() const {
  std::optional<Index> best;
  Wide best_abs = 0;
  for (const auto& [i, x] : entries_) {
    if (wide_abs(x) > best_abs) {
      best = i;
      best_abs = wide_abs(x);
    }
  }
  return best;
}

bool SparseVector::is_valid_heavy_hitter(Index i) const {
  if (i >= n_) return false;
  return 2 * wide_abs(get(i)) >= 2 * linf() - l1();
}

Index SparseVector::count_valid_heavy_hitters() const {
  const Wide rhs = 2 * linf() - l1();
  Index count = 0;
  for (const auto& [i, x] : entries_) count += 2 * wide_abs(x) >= rhs ? 1 : 0;
  if (0 >= rhs) count += n_ - entries_.size();
  return count;
}

SparseVector SparseVector::permuted(const std::vector<Index>& pi) const {
  if (pi.size() != n_) throw std::invalid_argument("permutation size does not match dimension");
  SparseVector out(n_);
  for (const auto& [i, x] : entries_) out.add(pi[i], x);
  return out;
}

}  // namespace probelab
