#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace seqdesign::detail {

// Shortest round-trip decimal form of a double ("1", "0.1", "2.5e-17", ...).
// std::to_chars guarantees the printed text parses back to the same bits, and
// its output is implementation-independent, which keeps CSVs byte-stable.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace seqdesign::detail
