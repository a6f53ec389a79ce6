#include "dacq/database.hpp"

#include "dacq/error.hpp"
#include "dacq/tuple_index.hpp"

#include <fstream>
#include <sstream>

namespace dacq {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

void reject_duplicates(const Relation& r) {
    TupleIndex seen(r.arity, r.rows);
    for (std::size_t i = 0; i < r.rows; ++i) {
        if (!seen.insert(r.row(i)).second)
            throw Error(ErrorCode::DuplicateFact,
                        "relation " + r.name + " repeats a fact at row " + std::to_string(i + 1));
    }
}

}  // namespace

RawRelation parse_relation(std::string_view csv, const std::string& name, std::size_t arity, bool annot_col) {
    RawRelation raw;
    raw.relation.name = name;
    raw.relation.arity = arity;
    if (annot_col) raw.annotation_column.emplace();
    std::size_t expected = arity + (annot_col ? 1 : 0);
    std::size_t line_no = 0;
    std::size_t start = 0;
    std::vector<Const> row(arity);
    while (start < csv.size()) {
        std::size_t nl = csv.find('\n', start);
        std::string_view line = csv.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? csv.size() : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (fields.size() != expected)
            throw Error(ErrorCode::ArityMismatch, "relation " + name + " row " + std::to_string(line_no) + " has " +
                                                      std::to_string(fields.size()) + " fields, expected " +
                                                      std::to_string(expected));
        for (std::size_t j = 0; j < arity; ++j) row[j] = intern(fields[j]);
        raw.relation.cells.insert(raw.relation.cells.end(), row.begin(), row.end());
        ++raw.relation.rows;
        if (annot_col) raw.annotation_column->emplace_back(fields.back());
    }
    reject_duplicates(raw.relation);
    return raw;
}

RawRelation load_relation(const std::string& path, const std::string& name, std::size_t arity, bool annot_col) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_relation(buf.str(), name, arity, annot_col);
}

RawRelation make_relation(const std::string& name, std::size_t arity,
                          const std::vector<std::vector<std::string>>& rows) {
    RawRelation raw;
    raw.relation.name = name;
    raw.relation.arity = arity;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != arity)
            throw Error(ErrorCode::ArityMismatch, "relation " + name + " row " + std::to_string(i + 1));
        for (const auto& cell : rows[i]) raw.relation.cells.push_back(intern(cell));
        ++raw.relation.rows;
    }
    reject_duplicates(raw.relation);
    return raw;
}

void AnnotatedDatabase::refresh_profile() {
    annotated_relation.reset();
    all_one = true;
    std::size_t carriers = 0;
    for (const auto& [name, rel] : relations) {
        bool ones = true;
        for (const auto& a : rel.annotations)
            if (!semiring.is_one(a)) {
                ones = false;
                break;
            }
        if (!ones) {
            ++carriers;
            annotated_relation = name;
        }
    }
    all_one = carriers == 0;
    if (carriers > 1) annotated_relation.reset();
}

const Relation& AnnotatedDatabase::at(const std::string& name) const {
    auto it = relations.find(name);
    if (it == relations.end()) throw Error(ErrorCode::Semantic, "unknown relation " + name);
    return it->second;
}

Relation& AnnotatedDatabase::at(const std::string& name) {
    auto it = relations.find(name);
    if (it == relations.end()) throw Error(ErrorCode::Semantic, "unknown relation " + name);
    return it->second;
}

std::size_t AnnotatedDatabase::total_facts() const {
    std::size_t n = 0;
    for (const auto& [name, rel] : relations) n += rel.rows;
    return n;
}

AnnotatedDatabase annotate_database(const std::vector<RawRelation>& relations, const Semiring& s) {
    AnnotatedDatabase db;
    db.semiring = s;
    for (const auto& raw : relations) {
        Relation r = raw.relation;
        r.annotations.clear();
        r.annotations.reserve(r.rows);
        for (std::size_t i = 0; i < r.rows; ++i)
            r.annotations.push_back(raw.annotation_column ? s.parse((*raw.annotation_column)[i]) : s.one());
        db.relations[r.name] = std::move(r);
    }
    db.refresh_profile();
    return db;
}

}  // namespace dacq
