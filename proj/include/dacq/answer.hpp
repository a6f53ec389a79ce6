#pragma once

#include "dacq/constants.hpp"
#include "dacq/query.hpp"
#include "dacq/semiring.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dacq {

using Datum = std::variant<Const, Value>;
using Answer = std::vector<Datum>;

/// Lexicographic order over a head: constants by const_compare, computed
/// positions by the order of their semiring.
class AnswerOrder {
public:
    AnswerOrder() = default;
    /// * positions use `s`; aggregate positions use output_semiring(fn).
    AnswerOrder(const Query& q, const Semiring& s);

    int compare(const Answer& a, const Answer& b) const;
    bool less(const Answer& a, const Answer& b) const { return compare(a, b) < 0; }
    std::string format(const Answer& a) const;
    const std::vector<std::optional<Semiring>>& positions() const { return positions_; }

private:
    std::vector<std::optional<Semiring>> positions_;
};

}  // namespace dacq
