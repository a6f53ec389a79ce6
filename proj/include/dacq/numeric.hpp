#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace dacq {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Accepts "12", "-3", "2.50", "7/4". Returns nullopt on anything else.
std::optional<Rational> parse_rational(std::string_view text);
std::optional<Integer> parse_integer(std::string_view text);

// Integer rationals print without a denominator, everything else as p/q.
std::string format_rational(const Rational& r);

}  // namespace dacq
