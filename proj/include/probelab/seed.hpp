#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace probelab {

/// SplitMix64 finalizer. Used as the mixing step for all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Master seed plus a derivation path. Derived seeds are pure functions of
/// (master, labels, indices), so evaluation order and threading never change
/// the randomness a component sees.
class SketchSeed {
 public:
  constexpr SketchSeed() = default;
  constexpr explicit SketchSeed(std::uint64_t master) : value_(master) {}

  constexpr std::uint64_t value() const { return value_; }

  constexpr SketchSeed derive(std::string_view label, std::uint64_t index = 0) const {
    return SketchSeed(mix64(value_ ^ mix64(hash_label(label) + mix64(index))));
  }

  friend constexpr bool operator==(SketchSeed, SketchSeed) = default;

 private:
  std::uint64_t value_ = 0;
};

/// Deterministic generator: std::mt19937_64 for the stream, with bounded and
/// unit-interval draws implemented here so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(SketchSeed seed) : engine_(seed.value()) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound). bound must be positive. Lemire's method.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(span == 0 ? next() : below(span));
  }

  /// 53-bit uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace probelab
