#include "elexsim/units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

namespace elex {

namespace {

struct Suffix {
    std::string_view text;
    double scale;
};

// "meg" must be tried before "m".
constexpr std::array<Suffix, 6> kSuffixes{{
    {"meg", 1e6}, {"p", 1e-12}, {"n", 1e-9}, {"u", 1e-6}, {"m", 1e-3}, {"k", 1e3},
}};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::optional<double> parse_si(std::string_view text) {
    if (text.empty()) return std::nullopt;
    const std::string s = lower(text);
    // strtod handles exponents, leading sign and "inf"; reject the latter.
    const char* begin = s.c_str();
    char* end = nullptr;
    const double mantissa = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(mantissa)) return std::nullopt;
    std::string_view rest(end);
    if (rest.empty()) return mantissa;
    for (const auto& suffix : kSuffixes) {
        if (rest == suffix.text) return mantissa * suffix.scale;
    }
    return std::nullopt;
}

std::string format_number(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return std::to_string(value);
    return std::string(buf.data(), ptr);
}

}  // namespace elex
