#ifndef HJIPI_SRC_FORMAT_HPP
#define HJIPI_SRC_FORMAT_HPP

#include <charconv>
#include <string>
#include <string_view>

#include "hjipi/common.hpp"

namespace hjipi::detail {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCategory::kIo, "cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace hjipi::detail

#endif  // HJIPI_SRC_FORMAT_HPP
