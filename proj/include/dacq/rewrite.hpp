#pragma once

#include "dacq/database.hpp"
#include "dacq/hypergraph.hpp"
#include "dacq/query.hpp"

#include <string>
#include <vector>

namespace dacq {

/// Query plus database in normalized form: every atom has its own relation
/// whose columns are the atom's (distinct) variables in order.
struct Instance {
    Query query;
    AnnotatedDatabase db;
};

struct RewriteStep {
    std::string tag;     // SelfJoinSplit, FullReduce, EliminateLeaf, Deannotate, ExtendY, AnnotationToColumn, ...
    std::string detail;
    std::string after;   // query after the step
};

/// Gives every atom a private copy of its relation (suffix #k on repeated
/// names) and folds repeated variables inside an atom into one column.
Instance make_self_join_free(const Query& q, const AnnotatedDatabase& db);

/// Two semi-join sweeps over a join tree; annotations untouched.
AnnotatedDatabase full_reduce(const Query& q, const AnnotatedDatabase& db);

struct EliminationPlan {
    ExtTree tree;
    std::vector<std::string> node_relation;
    std::vector<std::pair<int, int>> steps;  // (leaf, neighbour it is folded into)
    Query full;                              // one atom per free node
    std::vector<int> full_nodes;             // tree node of each atom of `full`
};

/// Query-only part of existential elimination over a given ext-connex tree.
EliminationPlan plan_elimination(const Query& q, ExtTree tree);
Instance apply_elimination(const EliminationPlan& plan, const Instance& in);

/// Full acyclic equivalent of a free-connex instance (any semiring).
Instance eliminate_existentials(const Instance& in);
/// Query shape produced by eliminate_existentials.
Query eliminated_shape(const Query& q);

struct IdempotentResult {
    Instance instance;
    std::string annotated;  // relation carrying all non-1 annotations
};

IdempotentResult idempotent_eliminate(const Instance& in, const std::string& relation);
/// Query shape and carrier produced by idempotent_eliminate.
std::pair<Query, std::string> idempotent_shape(const Query& q, const std::string& relation);

/// Sums out existential variables that occur only in the atom of `relation`.
Instance project_private(const Instance& in, const std::string& relation);
Query project_private_shape(const Query& q, const std::string& relation);

/// Replaces * by a fresh value variable y (placed per the deannotation rules)
/// and appends y to every atom covering the atom of `relation`.
Query deannotate(const Query& q, const std::string& relation);
/// Name of the variable introduced by deannotate / extend_with_y.
inline constexpr const char* kAnnotationVar = "y__";

/// Materializes the deannotation: the annotation of each fact of `relation`
/// becomes the y column, propagated to covering atoms.
Instance extend_with_annotation_var(const Instance& in, const std::string& relation);

/// Every atom holds all head variables after * or none of them.
bool z_block_condition(const Query& q);

/// (x, *, z) -> (x, y, z, *), y = product of the annotations of the atoms
/// not contained in x.
Instance extend_with_y(const Instance& in);
Query extend_with_y_shape(const Query& q);

}  // namespace dacq
