#pragma once

#include <array>
#include <cstdint>

#include "probelab/seed.hpp"

namespace probelab {

/// K-wise independent hash: a random polynomial of degree K-1 over the
/// Mersenne prime field p = 2^61 - 1.
template <unsigned K>
class PolyHash {
  static_assert(K >= 1);

 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  PolyHash() = default;
  explicit PolyHash(SketchSeed seed) {
    Rng rng(seed);
    for (auto& c : coeffs_) c = rng.below(kPrime);
    if (K > 1 && coeffs_[K - 1] == 0) coeffs_[K - 1] = 1;
  }

  /// Value in [0, p).
  std::uint64_t operator()(std::uint64_t x) const {
    const std::uint64_t xr = reduce(x);
    std::uint64_t acc = coeffs_[K - 1];
    for (unsigned k = K - 1; k-- > 0;) acc = add(mul(acc, xr), coeffs_[k]);
    return acc;
  }

  std::uint64_t bucket(std::uint64_t x, std::uint64_t buckets) const { return (*this)(x) % buckets; }

  /// +1 or -1, from the low bit.
  int sign(std::uint64_t x) const { return ((*this)(x) & 1) ? 1 : -1; }

 private:
  static std::uint64_t reduce(std::uint64_t x) {
    x = (x & kPrime) + (x >> 61);
    return x >= kPrime ? x - kPrime : x;
  }
  static std::uint64_t add(std::uint64_t a, std::uint64_t b) { return reduce(a + b); }
  static std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
    const unsigned __int128 m = static_cast<unsigned __int128>(a) * b;
    const std::uint64_t lo = static_cast<std::uint64_t>(m) & kPrime;
    const std::uint64_t hi = static_cast<std::uint64_t>(m >> 61);
    return reduce(lo + hi);
  }

  std::array<std::uint64_t, K> coeffs_{};
};

using PairwiseHash = PolyHash<2>;
using FourWiseHash = PolyHash<4>;

}  // namespace probelab
