#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "lnnet/errors.hpp"

namespace lnnet {

// Shortest decimal string that parses back to exactly the same double.
// Never more than 17 significant digits.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        throw error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline std::string format_size(std::size_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        throw error("format_size: conversion failed");
    return std::string(buf, ptr);
}

inline std::string format_int(long long v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        throw error("format_int: conversion failed");
    return std::string(buf, ptr);
}

// Parses a full token as a double; rejects partial matches.
// Accepts "inf"/"nan" spellings only if allow_nonfinite is set.
inline bool try_parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

inline bool try_parse_long(std::string_view s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

} // namespace lnnet
