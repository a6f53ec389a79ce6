#pragma once

#include "dacq/access.hpp"
#include "dacq/answer.hpp"
#include "dacq/database.hpp"
#include "dacq/hypergraph.hpp"
#include "dacq/query.hpp"
#include "dacq/rewrite.hpp"
#include "dacq/semiring.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dacq {

enum class Verdict { Tractable, Intractable, Unknown };
enum class PlanTag { StarLast, ZBlockMonotone, FullDeannotate, IdempotentLocal, CountProduct, MultiAggregateStarLast };

std::string to_string(Verdict v);
std::string to_string(PlanTag t);

struct Plan {
    PlanTag tag = PlanTag::StarLast;
    std::string relation;   // R for FullDeannotate / IdempotentLocal
    std::string structure;  // target structure kind
    std::vector<RewriteStep> chain;
    bool constant_star = false;  // * is 1 on every answer and is left out of the order
};

struct Certificate {
    Verdict verdict = Verdict::Unknown;
    std::optional<Plan> plan;
    std::string theorem;
    std::string reason;
    std::optional<TrioWitness> trio;
    std::optional<CyclicWitness> cyclic;

    bool tractable() const { return verdict == Verdict::Tractable; }
    nlohmann::json to_json(const Query& q) const;
};

/// Where the non-1 annotations of a database live.
struct Profile {
    bool all_one = true;
    std::optional<std::string> annotated;
    bool local() const { return all_one || annotated.has_value(); }
};

Profile profile_of(const AnnotatedDatabase& db);

/// Classifies a CQ or CQ* under semiring `s` and annotation profile.
Certificate classify(const Query& q, const Semiring& s, const Profile& profile);
/// Classifies an ACQ; CountD needs `domain_declared`.
Certificate classify_acq(const Query& acq, bool domain_declared);

/// Uniform access over whatever structures a plan needs.
class Engine {
public:
    virtual ~Engine() = default;
    virtual Integer count() const = 0;
    /// 1-based; nullopt past the end.
    virtual std::optional<Answer> get(const Integer& i) const = 0;
    virtual const AnswerOrder& order() const = 0;
    virtual nlohmann::json stats() const = 0;
    const std::vector<RewriteStep>& executed() const { return executed_; }

protected:
    std::vector<RewriteStep> executed_;
};

struct PrepareOptions {
    bool bigint = false;
};

std::unique_ptr<Engine> prepare(const Certificate& cert, const Query& q, const AnnotatedDatabase& db,
                                const PrepareOptions& options = {});
/// ACQ engines read constants from `relations` and annotate them per aggregate.
std::unique_ptr<Engine> prepare_acq(const Certificate& cert, const Query& acq, const std::vector<RawRelation>& relations,
                                    const std::optional<std::vector<Const>>& domain, const PrepareOptions& options = {});

/// Matches Q(Count(), x, y) :- R(x, w), S(y, z) up to column order.
bool is_count_product_shape(const Query& q);

nlohmann::json to_json(const LexStats& s);

}  // namespace dacq
