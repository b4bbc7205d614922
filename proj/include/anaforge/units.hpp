#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace anaforge {

/// Parses a SPICE magnitude such as `10k`, `4.7u`, `2meg`, `1e-9`, `5V` or
/// `10kOhm`. Scale suffixes are case-insensitive and follow SPICE (`m` is
/// milli, `meg` is mega); trailing unit letters after the scale are ignored.
std::optional<double> parse_spice_number(std::string_view text);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

/// Lower-cased copy; SPICE identifiers compare case-insensitively.
std::string fold_case(std::string_view text);

bool iequals(std::string_view a, std::string_view b);

}  // namespace anaforge
