#pragma once

#include <string>
#include <vector>

#include "minterp/common.hpp"

namespace minterp {

// Shortest decimal string that round-trips to the exact double. Used for all
// CSV/JSON emission so outputs are byte-stable and parse back bit-exact.
std::string format_double(double v);

// Inverse of format_double; throws ConfigError on malformed input.
double parse_double(const std::string& s);

// Renders finite values via format_double, infinity as "inf" and the
// undefined tag as "undefined".
std::string format_ext(const ExtReal& v);

// Minimal CSV assembly: fields are joined with ',' and rows with '\n'.
// Numeric fields should already be formatted with format_double.
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace minterp
