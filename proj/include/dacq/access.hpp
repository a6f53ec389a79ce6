#pragma once

#include "dacq/database.hpp"
#include "dacq/numeric.hpp"
#include "dacq/query.hpp"
#include "dacq/semiring.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace dacq {

/// One answer of a layered structure: a cell per ordered variable (a Const,
/// or a value-pool index for value variables) and the annotation product.
struct LexAnswer {
    std::vector<std::uint32_t> cells;
    Value annotation;
    Value prefix;  // product over the first `prefix_layers` layers
};

struct LexStats {
    std::vector<std::size_t> layer_rows;
    std::vector<std::size_t> layer_buckets;
    std::size_t depth = 0;
    std::string total;
};

struct LexOptions {
    bool bigint = false;
    bool descending_values = false;  // rank value variables from largest to smallest
    std::size_t prefix_layers = 0;
    /// Order for value variables; the semiring order when empty.
    std::function<int(const Value&, const Value&)> value_compare;
};

/// Direct access in lexicographic `order` over a full acyclic query without
/// a disruptive trio. Immutable after construction.
class LexStructure {
public:
    virtual ~LexStructure() = default;
    virtual Integer count() const = 0;
    /// 1-based; nullopt past the end, IndexOutOfRange below 1.
    virtual std::optional<LexAnswer> access(const Integer& i) const = 0;
    virtual LexStats stats() const = 0;
    /// Prefix sums strictly increase inside every bucket and end at the
    /// bucket total; the root totals multiply to count().
    virtual bool check_invariants() const = 0;
    virtual const std::vector<int>& order() const = 0;
};

std::unique_ptr<LexStructure> build_lex(const Query& q, const AnnotatedDatabase& db, const std::vector<int>& order,
                                        const LexOptions& options = {});

/// Direct access for Q(Count(), x, y) :- R(x, w), S(y, z): answers ordered by
/// count, then by the count of x, then x, then y.
class CountProduct {
public:
    struct Bucket {
        std::uint64_t c = 0;
        std::uint64_t c2 = 0;
        std::size_t left = 0;   // index into groups_
        std::size_t right = 0;  // index into groups2_
    };
    struct Answer {
        Integer count;
        Const x = 0;
        Const y = 0;
    };

    /// `left` and `right` are binary relations; column 0 is the grouped one.
    CountProduct(const Relation& left, const Relation& right);

    Integer count() const { return total_; }
    std::optional<Answer> access(const Integer& d) const;
    const std::vector<Bucket>& buckets() const { return buckets_; }
    const std::vector<Const>& left_values(std::size_t group) const { return groups_[group].second; }
    const std::vector<Const>& right_values(std::size_t group) const { return groups2_[group].second; }

private:
    std::vector<std::pair<std::uint64_t, std::vector<Const>>> groups_;
    std::vector<std::pair<std::uint64_t, std::vector<Const>>> groups2_;
    std::vector<Bucket> buckets_;
    std::vector<Integer> before_;  // l_i: answers in earlier buckets
    Integer total_ = 0;
};

}  // namespace dacq
