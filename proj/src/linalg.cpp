#include "fgpan/linalg.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace fgpan {

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("format_double: non-finite value");
    }
    if (value == 0.0) {
        return std::signbit(value) ? "-0" : "0";
    }
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw std::runtime_error("format_double: conversion failed");
    }
    return std::string(buf.data(), end);
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || token.empty()) {
        throw FormatError("not a number: '" + std::string(token) + "'");
    }
    if (!std::isfinite(value)) {
        throw FormatError("non-finite number: '" + std::string(token) + "'");
    }
    return value;
}

Vector softmax(const Vector& logits) {
    const double shift = logits.maxCoeff();
    Vector out = (logits.array() - shift).exp();
    out /= out.sum();
    return out;
}

}  // namespace fgpan
