#pragma once

#include "dacq/constants.hpp"
#include "dacq/numeric.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dacq {

/// Tropical element; `infinite` marks the additive identity (+inf for min,
/// -inf for max).
struct Tropical {
    bool infinite = false;
    Rational value;
    friend bool operator==(const Tropical&, const Tropical&) = default;
};

/// Subset of the set-semiring domain; bit i is the i-th domain constant.
struct SetBits {
    std::uint64_t bits = 0;
    friend bool operator==(const SetBits&, const SetBits&) = default;
};

struct AvgPair {
    Rational sum;
    Integer count;
    friend bool operator==(const AvgPair&, const AvgPair&) = default;
};

using Value = std::variant<Integer, Rational, Tropical, SetBits, AvgPair>;

enum class Kind { Counting, Numeric, MinTropical, MaxTropical, Set, Avg };

struct SemiringKind {
    Kind tag = Kind::Counting;
    std::vector<Const> domain;  // Set only, in declared order
};

enum class Direction { NonDecreasing, NonIncreasing };

inline constexpr std::size_t kDefaultSetBound = 64;

class Semiring {
public:
    static Semiring instantiate(const SemiringKind& kind, std::size_t set_bound = kDefaultSetBound);

    Kind kind() const { return kind_.tag; }
    const SemiringKind& spec() const { return kind_; }
    const std::vector<Const>& domain() const { return kind_.domain; }
    const Value& zero() const { return zero_; }
    const Value& one() const { return one_; }
    bool plus_idempotent() const { return plus_idempotent_; }
    bool times_monotone() const { return times_monotone_; }
    /// True when the annotation domain contains the natural numbers.
    bool contains_naturals() const;
    std::string name() const;

    Value plus(const Value& a, const Value& b) const;
    Value times(const Value& a, const Value& b) const;
    /// -1, 0 or 1. For Avg, pairs with equal ratio compare equal.
    int compare(const Value& a, const Value& b) const;
    bool equal(const Value& a, const Value& b) const { return a == b; }
    bool is_one(const Value& a) const { return a == one_; }

    Direction monotone_direction(const Value& c) const;
    /// True when x -> c (x) x is constant, e.g. c = 0 in the numeric semiring.
    bool collapses(const Value& c) const;

    bool contains(const Value& a) const;
    Value parse(std::string_view literal) const;
    std::string format(const Value& a) const;

    /// Singleton {c} for the set semiring.
    Value singleton(Const c) const;
    /// Numeric constant lifted into the domain (Sum, Min, Max, Avg as (w,1)).
    Value lift(const Rational& r) const;

private:
    SemiringKind kind_;
    Value zero_;
    Value one_;
    bool plus_idempotent_ = false;
    bool times_monotone_ = false;
};

}  // namespace dacq
