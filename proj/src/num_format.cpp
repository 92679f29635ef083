#include "minterp/num_format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

namespace minterp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  if (s == "nan") return NAN;
  double out = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("cannot parse number: '" + s + "'");
  }
  return out;
}

std::string format_ext(const ExtReal& v) {
  switch (v.kind()) {
    case ExtReal::Kind::Finite:
      return format_double(v.value());
    case ExtReal::Kind::Infinite:
      return "inf";
    default:
      return "undefined";
  }
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) row += ',';
    row += fields[i];
  }
  row += '\n';
  return row;
}

}  // namespace minterp
