#include "dacq/numeric.hpp"

#include <cctype>

namespace dacq {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char ch : s)
        if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
    return true;
}

}  // namespace

std::optional<Integer> parse_integer(std::string_view text) {
    bool negative = false;
    if (!text.empty() && (text[0] == '-' || text[0] == '+')) {
        negative = text[0] == '-';
        text.remove_prefix(1);
    }
    if (!all_digits(text)) return std::nullopt;
    Integer v{std::string(text)};
    return negative ? Integer(-v) : v;
}

std::optional<Rational> parse_rational(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto num = parse_integer(text.substr(0, slash));
        std::string_view den_text = text.substr(slash + 1);
        if (!num || !all_digits(den_text)) return std::nullopt;
        Integer den{std::string(den_text)};
        if (den == 0) return std::nullopt;
        return Rational(*num, den);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string_view whole = text.substr(0, dot);
        std::string_view frac = text.substr(dot + 1);
        bool negative = !whole.empty() && whole[0] == '-';
        std::string_view digits = whole;
        if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) digits.remove_prefix(1);
        if ((!digits.empty() && !all_digits(digits)) || !all_digits(frac) || (digits.empty() && frac.empty()))
            return std::nullopt;
        Integer scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        Integer w = digits.empty() ? Integer(0) : Integer(std::string(digits));
        Integer f{std::string(frac)};
        Rational r(w * scale + f, scale);
        return negative ? Rational(-r) : r;
    }
    auto i = parse_integer(text);
    if (!i) return std::nullopt;
    return Rational(*i);
}

std::string format_rational(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

}  // namespace dacq
