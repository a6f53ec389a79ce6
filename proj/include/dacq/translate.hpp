#pragma once

#include "dacq/database.hpp"
#include "dacq/query.hpp"
#include "dacq/semiring.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dacq {

/// Which facts carry the aggregate argument as their annotation.
struct AnnotationRule {
    AggFn fn = AggFn::Count;
    int atom = -1;           // carrier atom in the translated body; -1 for Count
    std::string relation;    // carrier relation in the translated body
    std::string source;      // relation the carrier facts are copied from
    std::size_t column = 0;  // column holding the aggregate argument
};

struct Translation {
    Query query;  // head with the aggregate replaced by *
    SemiringKind kind;
    AnnotationRule rule;
};

/// Translates the `which`-th aggregate of `acq`; the other aggregates are
/// dropped from the head. `as` overrides the aggregate function (Avg is
/// served by Sum and Count). CountD needs `domain`.
Translation translate_acq(const Query& acq, std::size_t which = 0,
                          const std::optional<std::vector<Const>>& domain = std::nullopt,
                          std::optional<AggFn> as = std::nullopt);

/// All facts get 1 except the carrier's, which get their argument value.
AnnotatedDatabase annotate_with_rule(const Translation& t, const std::vector<RawRelation>& relations,
                                     std::size_t set_bound = kDefaultSetBound);

/// Semiring in which finalized aggregate values are displayed and ordered.
Semiring output_semiring(AggFn fn);
/// Maps an annotation to the aggregate's user-facing value (Avg -> sum/count,
/// CountD -> cardinality).
Value finalize(AggFn fn, const Value& v);

std::vector<Const> read_domain_file(const std::string& path);

}  // namespace dacq
