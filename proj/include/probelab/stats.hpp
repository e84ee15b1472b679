#pragma once

#include <cmath>
#include <cstdint>

namespace probelab {

struct Interval {
  double low = 0;
  double high = 1;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.96) {
  if (trials == 0) return {};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (phat + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::fmax(0.0, centre - half), std::fmin(1.0, centre + half)};
}

/// Standard deviation of the mean of `trials` Bernoulli(p) draws.
inline double bernoulli_sigma(double p, std::uint64_t trials) {
  return trials == 0 ? 0.0 : std::sqrt(p * (1 - p) / static_cast<double>(trials));
}

}  // namespace probelab
