#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace elex {

/// Parses a number with an optional SI suffix (p, n, u, m, k, meg; case
/// insensitive, "meg" wins over "m"). Returns nullopt on malformed input.
std::optional<double> parse_si(std::string_view text);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

}  // namespace elex
