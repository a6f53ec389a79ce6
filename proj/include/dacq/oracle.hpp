#pragma once

#include "dacq/answer.hpp"
#include "dacq/database.hpp"
#include "dacq/query.hpp"

#include <cstddef>
#include <vector>

namespace dacq {

struct OracleResult {
    std::vector<Answer> answers;  // sorted, duplicate-free
    std::vector<Value> values;    // computed value of each answer (first * or aggregate position)
};

inline constexpr std::size_t kOracleLimit = 1'000'000;

/// Naive backtracking over every homomorphism. Heads with * take the
/// semiring annotation; heads with aggregates apply them to the bag of
/// argument values directly, ignoring stored annotations.
OracleResult brute_force(const Query& q, const AnnotatedDatabase& db, std::size_t limit = kOracleLimit);

/// Q(Count(), x, y) :- R(x, w), S(y, z) ordered by count, then by the number
/// of R facts of x, then x, then y.
OracleResult brute_force_count_product(const Query& q, const AnnotatedDatabase& db,
                                       std::size_t limit = kOracleLimit);

}  // namespace dacq
