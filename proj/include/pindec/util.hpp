#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pindec::util {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without leaving the log domain.
double log_add(double a, double b);

double logsumexp(const double* begin, const double* end);
double logsumexp(const std::vector<double>& xs);

// Strict UTF-8: malformed input throws std::invalid_argument.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

// Canonical composition over a small Latin table (base letter + combining
// mark -> precomposed). CJK codepoints pass through untouched.
std::u32string nfc(std::u32string_view s);

std::string_view trim(std::string_view s);

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(std::string_view s);

}  // namespace pindec::util
