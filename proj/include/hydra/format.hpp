#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include "hydra/errors.hpp"

namespace hydra {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw HydraError("format_double failed");
    return std::string(buf, end);
}

inline double parse_double(std::string_view text) {
    if (text == "nan") return std::nan("");
    if (text == "inf") return INFINITY;
    if (text == "-inf") return -INFINITY;
    double value = 0.0;
    const char* first = text.data();
    if (!text.empty() && text.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || first == text.data() + text.size()) {
        throw DataError("not a number: \"" + std::string(text) + "\"");
    }
    return value;
}

template <typename Int>
Int parse_int(std::string_view text) {
    Int value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw DataError("not an integer: \"" + std::string(text) + "\"");
    }
    return value;
}

}  // namespace hydra
