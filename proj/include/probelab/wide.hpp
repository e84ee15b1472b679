#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace probelab {

// Signed 128-bit value type used for vector entries and update magnitudes.
// Geometric update streams reach C^a = 2^80 and beyond, which does not
// fit a 64-bit integer.
using Wide = __int128;
using UWide = unsigned __int128;

inline constexpr Wide kWideMax = static_cast<Wide>(~UWide{0} >> 1);

inline Wide wide_abs(Wide x) { return x < 0 ? -x : x; }

std::string to_string(Wide value);

/// Parses an optionally signed decimal integer. Throws std::invalid_argument.
Wide parse_wide(std::string_view text);

/// base^exp, or nullopt when |result| would exceed kWideMax.
std::optional<Wide> checked_pow(Wide base, unsigned exp);

inline long double to_long_double(Wide x) { return static_cast<long double>(x); }

}  // namespace probelab
