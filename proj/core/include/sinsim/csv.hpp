#pragma once

#include <string>

namespace sinsim {

/// Shortest decimal text that parses back to the same double. Non-finite
/// values print as nan, inf and -inf.
std::string format_double(double x);

}  // namespace sinsim
