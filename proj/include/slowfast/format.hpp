#pragma once

#include <charconv>
#include <span>
#include <string>
#include <system_error>

namespace slowfast::fmt {

/// Locale-independent text with 17 significant digits (round-trips a double).
inline std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

inline std::string join(std::span<const double> v, char sep = ';') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += num(v[i]);
    }
    return out;
}

}  // namespace slowfast::fmt
