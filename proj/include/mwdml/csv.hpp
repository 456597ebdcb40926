#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace mwdml {

/// Shortest round-trip decimal form, '.' separator regardless of locale.
inline std::string format_number(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

}  // namespace mwdml
