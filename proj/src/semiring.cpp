#include "dacq/semiring.hpp"

#include "dacq/error.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <unordered_set>

namespace dacq {

namespace {

template <class T>
const T& as(const Value& v) {
    return std::get<T>(v);
}

int cmp(const Rational& a, const Rational& b) { return a < b ? -1 : (b < a ? 1 : 0); }

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

Semiring Semiring::instantiate(const SemiringKind& kind, std::size_t set_bound) {
    Semiring s;
    s.kind_ = kind;
    switch (kind.tag) {
    case Kind::Counting:
        s.zero_ = Integer(0);
        s.one_ = Integer(1);
        s.times_monotone_ = true;
        break;
    case Kind::Numeric:
        s.zero_ = Rational(0);
        s.one_ = Rational(1);
        s.times_monotone_ = true;
        break;
    case Kind::MinTropical:
    case Kind::MaxTropical:
        s.zero_ = Tropical{true, Rational(0)};
        s.one_ = Tropical{false, Rational(0)};
        s.plus_idempotent_ = true;
        s.times_monotone_ = true;
        break;
    case Kind::Set: {
        if (kind.domain.empty()) throw Error(ErrorCode::MissingDomain, "set semiring needs a non-empty domain");
        if (kind.domain.size() > std::min<std::size_t>(set_bound, 64))
            throw Error(ErrorCode::DomainTooLarge,
                        "domain has " + std::to_string(kind.domain.size()) + " elements, bound is " +
                            std::to_string(std::min<std::size_t>(set_bound, 64)));
        std::unordered_set<Const> seen(kind.domain.begin(), kind.domain.end());
        if (seen.size() != kind.domain.size()) throw Error(ErrorCode::Semantic, "duplicate constant in set domain");
        s.zero_ = SetBits{0};
        s.one_ = SetBits{kind.domain.size() == 64 ? ~std::uint64_t{0}
                                                  : ((std::uint64_t{1} << kind.domain.size()) - 1)};
        s.plus_idempotent_ = true;
        break;
    }
    case Kind::Avg:
        s.zero_ = AvgPair{Rational(0), Integer(0)};
        s.one_ = AvgPair{Rational(0), Integer(1)};
        s.times_monotone_ = true;
        break;
    }
    return s;
}

bool Semiring::contains_naturals() const {
    return kind() == Kind::Counting || kind() == Kind::Numeric || kind() == Kind::MinTropical ||
           kind() == Kind::MaxTropical;
}

std::string Semiring::name() const {
    switch (kind()) {
    case Kind::Counting: return "counting";
    case Kind::Numeric: return "numeric";
    case Kind::MinTropical: return "mintrop";
    case Kind::MaxTropical: return "maxtrop";
    case Kind::Set: return "set";
    case Kind::Avg: return "avg";
    }
    return "?";
}

Value Semiring::plus(const Value& a, const Value& b) const {
    switch (kind()) {
    case Kind::Counting: return Integer(as<Integer>(a) + as<Integer>(b));
    case Kind::Numeric: return Rational(as<Rational>(a) + as<Rational>(b));
    case Kind::MinTropical:
    case Kind::MaxTropical: {
        const auto& x = as<Tropical>(a);
        const auto& y = as<Tropical>(b);
        if (x.infinite) return y;
        if (y.infinite) return x;
        bool take_x = kind() == Kind::MinTropical ? !(y.value < x.value) : !(x.value < y.value);
        return take_x ? x : y;
    }
    case Kind::Set: return SetBits{as<SetBits>(a).bits | as<SetBits>(b).bits};
    case Kind::Avg: {
        const auto& x = as<AvgPair>(a);
        const auto& y = as<AvgPair>(b);
        return AvgPair{x.sum + y.sum, x.count + y.count};
    }
    }
    return a;
}

Value Semiring::times(const Value& a, const Value& b) const {
    switch (kind()) {
    case Kind::Counting: return Integer(as<Integer>(a) * as<Integer>(b));
    case Kind::Numeric: return Rational(as<Rational>(a) * as<Rational>(b));
    case Kind::MinTropical:
    case Kind::MaxTropical: {
        const auto& x = as<Tropical>(a);
        const auto& y = as<Tropical>(b);
        if (x.infinite || y.infinite) return zero_;
        return Tropical{false, x.value + y.value};
    }
    case Kind::Set: return SetBits{as<SetBits>(a).bits & as<SetBits>(b).bits};
    case Kind::Avg: {
        const auto& x = as<AvgPair>(a);
        const auto& y = as<AvgPair>(b);
        return AvgPair{x.sum * Rational(y.count) + y.sum * Rational(x.count), x.count * y.count};
    }
    }
    return a;
}

int Semiring::compare(const Value& a, const Value& b) const {
    switch (kind()) {
    case Kind::Counting: {
        const auto& x = as<Integer>(a);
        const auto& y = as<Integer>(b);
        return x < y ? -1 : (y < x ? 1 : 0);
    }
    case Kind::Numeric: return cmp(as<Rational>(a), as<Rational>(b));
    case Kind::MinTropical:
    case Kind::MaxTropical: {
        const auto& x = as<Tropical>(a);
        const auto& y = as<Tropical>(b);
        if (x.infinite || y.infinite) {
            if (x.infinite && y.infinite) return 0;
            // +inf is largest for min, -inf is smallest for max.
            int inf_side = kind() == Kind::MinTropical ? 1 : -1;
            return x.infinite ? inf_side : -inf_side;
        }
        return cmp(x.value, y.value);
    }
    case Kind::Set: {
        std::uint64_t x = as<SetBits>(a).bits;
        std::uint64_t y = as<SetBits>(b).bits;
        int cx = std::popcount(x);
        int cy = std::popcount(y);
        if (cx != cy) return cx < cy ? -1 : 1;
        if (x == y) return 0;
        // Lexicographic on the sorted element lists: the set holding the
        // smallest differing element comes first.
        std::uint64_t diff = x ^ y;
        std::uint64_t lowest = diff & (~diff + 1);
        return (x & lowest) ? -1 : 1;
    }
    case Kind::Avg: {
        const auto& x = as<AvgPair>(a);
        const auto& y = as<AvgPair>(b);
        bool xz = x.count == 0;
        bool yz = y.count == 0;
        if (xz || yz) return xz && yz ? 0 : (xz ? -1 : 1);
        return cmp(x.sum * Rational(y.count), y.sum * Rational(x.count));
    }
    }
    return 0;
}

Direction Semiring::monotone_direction(const Value& c) const {
    if (!times_monotone_) throw Error(ErrorCode::NotMonotone, name() + " semiring is not times-monotone");
    if (kind() == Kind::Numeric && as<Rational>(c) < 0) return Direction::NonIncreasing;
    return Direction::NonDecreasing;
}

bool Semiring::collapses(const Value& c) const {
    switch (kind()) {
    case Kind::Counting: return as<Integer>(c) == 0;
    case Kind::Numeric: return as<Rational>(c) == 0;
    case Kind::MinTropical:
    case Kind::MaxTropical: return as<Tropical>(c).infinite;
    case Kind::Set: return as<SetBits>(c).bits == 0;
    case Kind::Avg: return as<AvgPair>(c).count == 0;
    }
    return false;
}

bool Semiring::contains(const Value& a) const {
    switch (kind()) {
    case Kind::Counting: return std::holds_alternative<Integer>(a) && as<Integer>(a) >= 0;
    case Kind::Numeric: return std::holds_alternative<Rational>(a);
    case Kind::MinTropical:
    case Kind::MaxTropical: return std::holds_alternative<Tropical>(a);
    case Kind::Set: return std::holds_alternative<SetBits>(a) && (as<SetBits>(a).bits & ~as<SetBits>(one_).bits) == 0;
    case Kind::Avg: return std::holds_alternative<AvgPair>(a) && as<AvgPair>(a).count >= 0;
    }
    return false;
}

Value Semiring::singleton(Const c) const {
    auto it = std::find(domain().begin(), domain().end(), c);
    if (it == domain().end())
        throw Error(ErrorCode::AnnotationParse, "constant '" + const_text(c) + "' is outside the set domain");
    return SetBits{std::uint64_t{1} << (it - domain().begin())};
}

Value Semiring::lift(const Rational& r) const {
    switch (kind()) {
    case Kind::Counting:
        if (denominator(r) != 1 || r < 0) throw Error(ErrorCode::AnnotationParse, "not a natural number");
        return Integer(numerator(r));
    case Kind::Numeric: return r;
    case Kind::MinTropical:
    case Kind::MaxTropical: return Tropical{false, r};
    case Kind::Avg: return AvgPair{r, Integer(1)};
    case Kind::Set: break;
    }
    throw Error(ErrorCode::AnnotationParse, "numbers cannot annotate set-semiring facts");
}

Value Semiring::parse(std::string_view literal) const {
    std::string text = trim(literal);
    auto fail = [&]() -> Error {
        return Error(ErrorCode::AnnotationParse, "cannot read '" + text + "' as a " + name() + " value");
    };
    switch (kind()) {
    case Kind::Counting: {
        auto v = parse_integer(text);
        if (!v || *v < 0) throw fail();
        return *v;
    }
    case Kind::Numeric: {
        auto v = parse_rational(text);
        if (!v) throw fail();
        return *v;
    }
    case Kind::MinTropical:
    case Kind::MaxTropical: {
        std::string inf = kind() == Kind::MinTropical ? "inf" : "-inf";
        if (text == inf) return zero_;
        auto v = parse_rational(text);
        if (!v) throw fail();
        return Tropical{false, *v};
    }
    case Kind::Set: {
        std::string body = text;
        if (body.size() >= 2 && body.front() == '{' && body.back() == '}') body = body.substr(1, body.size() - 2);
        std::uint64_t bits = 0;
        std::size_t start = 0;
        while (start <= body.size()) {
            std::size_t bar = body.find('|', start);
            std::string item = trim(std::string_view(body).substr(start, bar == std::string::npos ? std::string::npos : bar - start));
            if (!item.empty()) {
                auto it = std::find_if(domain().begin(), domain().end(),
                                       [&](Const c) { return const_text(c) == item; });
                if (it == domain().end()) throw fail();
                bits |= std::uint64_t{1} << (it - domain().begin());
            }
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
        return SetBits{bits};
    }
    case Kind::Avg: {
        auto colon = text.find(':');
        if (colon == std::string::npos) {
            auto v = parse_rational(text);
            if (!v) throw fail();
            return AvgPair{*v, Integer(1)};
        }
        auto s = parse_rational(text.substr(0, colon));
        auto c = parse_integer(text.substr(colon + 1));
        if (!s || !c || *c < 0) throw fail();
        return AvgPair{*s, *c};
    }
    }
    throw fail();
}

std::string Semiring::format(const Value& a) const {
    if (auto i = std::get_if<Integer>(&a)) return i->str();
    if (auto r = std::get_if<Rational>(&a)) return format_rational(*r);
    if (auto t = std::get_if<Tropical>(&a)) {
        if (t->infinite) return kind() == Kind::MaxTropical ? "-inf" : "inf";
        return format_rational(t->value);
    }
    if (auto s = std::get_if<SetBits>(&a)) {
        std::string out = "{";
        bool first = true;
        for (std::size_t i = 0; i < domain().size(); ++i) {
            if (!(s->bits >> i & 1)) continue;
            if (!first) out += "|";
            out += const_text(domain()[i]);
            first = false;
        }
        return out + "}";
    }
    const auto& p = std::get<AvgPair>(a);
    return format_rational(p.sum) + ":" + p.count.str();
}

}  // namespace dacq
