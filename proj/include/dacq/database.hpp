#pragma once

#include "dacq/constants.hpp"
#include "dacq/semiring.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dacq {

struct Relation {
    std::string name;
    std::size_t arity = 0;
    std::size_t rows = 0;
    std::vector<Const> cells;        // row-major
    std::vector<Value> annotations;  // one per row once annotated

    std::size_t size() const { return rows; }
    const Const* row(std::size_t i) const { return cells.data() + i * arity; }
    std::span<const Const> tuple(std::size_t i) const { return {row(i), arity}; }
    void add(const Const* r, Value annotation) {
        cells.insert(cells.end(), r, r + arity);
        annotations.push_back(std::move(annotation));
        ++rows;
    }
};

/// Relation as read from disk, before annotations are interpreted.
struct RawRelation {
    Relation relation;
    std::optional<std::vector<std::string>> annotation_column;
};

/// Reads a header-less CSV. With `annot_col`, the last column is split off as
/// raw annotation literals.
RawRelation load_relation(const std::string& path, const std::string& name, std::size_t arity, bool annot_col);
RawRelation parse_relation(std::string_view csv, const std::string& name, std::size_t arity, bool annot_col);
RawRelation make_relation(const std::string& name, std::size_t arity,
                          const std::vector<std::vector<std::string>>& rows);

struct AnnotatedDatabase {
    Semiring semiring = Semiring::instantiate({});
    std::map<std::string, Relation> relations;
    /// Storage for cells of value variables; such cells index into this pool.
    std::vector<Value> value_pool;
    std::optional<std::string> annotated_relation;
    bool all_one = true;

    bool locally_annotated() const { return all_one || annotated_relation.has_value(); }
    /// Recomputes `annotated_relation` and `all_one` from the data.
    void refresh_profile();
    const Relation& at(const std::string& name) const;
    Relation& at(const std::string& name);
    std::size_t total_facts() const;
};

/// Facts without an annotation column get 1; literals are parsed in `s`.
AnnotatedDatabase annotate_database(const std::vector<RawRelation>& relations, const Semiring& s);

}  // namespace dacq
