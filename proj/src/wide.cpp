#include "probelab/wide.hpp"

#include <algorithm>

namespace probelab {

std::string to_string(Wide value) {
  if (value == 0) return "0";
  const bool negative = value < 0;
  UWide mag = negative ? UWide(0) - static_cast<UWide>(value) : static_cast<UWide>(value);
  std::string digits;
  while (mag > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  if (negative) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Wide parse_wide(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty integer");
  bool negative = false;
  std::size_t pos = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  if (pos == text.size()) throw std::invalid_argument("integer has no digits");
  UWide mag = 0;
  const UWide limit = static_cast<UWide>(kWideMax) + (negative ? 1 : 0);
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c < '0' || c > '9') throw std::invalid_argument("bad digit in integer: " + std::string(text));
    const UWide next = mag * 10 + static_cast<UWide>(c - '0');
    if (next / 10 != mag || next > limit) throw std::invalid_argument("integer out of range: " + std::string(text));
    mag = next;
  }
  return negative ? static_cast<Wide>(UWide(0) - mag) : static_cast<Wide>(mag);
}

std::optional<Wide> checked_pow(Wide base, unsigned exp) {
  Wide result = 1;
  for (unsigned k = 0; k < exp; ++k) {
    if (base != 0 && wide_abs(result) > kWideMax / wide_abs(base)) return std::nullopt;
    result *= base;
  }
  return result;
}

}  // namespace probelab
