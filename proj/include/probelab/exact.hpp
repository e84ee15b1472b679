#pragma once

#include <map>
#include <optional>
#include <vector>

#include "probelab/sketch.hpp"

namespace probelab {

/// Sparse exact vector over [n]. Serves as the oracle every sketch answer is
/// compared against.
class SparseVector {
 public:
  explicit SparseVector(Index n) : n_(n) {}

  Index dimension() const { return n_; }
  void add(Index i, Wide delta);
  Wide get(Index i) const;
  const std::map<Index, Wide>& entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }

  Wide l1() const;
  Wide linf() const;
  /// Sum of squares in long double, accumulated in ascending magnitude.
  long double l2_squared() const;
  long double norm(int p) const;
  /// Entropy in bits of |v_i| / ||v||_1; nullopt for the zero vector.
  std::optional<long double> entropy() const;

  /// argmax |v_i|, lowest index on ties; nullopt for the zero vector.
  std::optional<Index> heavy_hitter() const;
  /// |v_i| >= ||v||_inf - ||v||_1 / 2, compared in exact integers.
  bool is_valid_heavy_hitter(Index i) const;
  /// Number of i in [n] (zero entries included) passing the predicate above.
  Index count_valid_heavy_hitters() const;

  /// pi(v) with pi(v)[pi[i]] = v[i].
  SparseVector permuted(const std::vector<Index>& pi) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  Index n_;
  std::map<Index, Wide> entries_;
};

/// Entropy in bits of a weight vector (nonnegative, not all zero).
long double entropy_bits(std::vector<long double> weights);

/// H(x) = -x lg x - (1-x) lg(1-x).
double binary_entropy(double x);

}  // namespace probelab
