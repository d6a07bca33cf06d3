#pragma once

#include <string>
#include <string_view>

namespace qmon {

/// Shortest text that parses back to exactly `value` (std::to_chars).
std::string format_double(double value);

/// ASCII case-insensitive comparison.
bool iequals(std::string_view a, std::string_view b);

}  // namespace qmon
