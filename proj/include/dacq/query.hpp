#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dacq {

using VarSet = std::uint64_t;
inline constexpr int kMaxVars = 64;

inline VarSet bit(int v) { return VarSet{1} << v; }
inline bool has(VarSet s, int v) { return (s >> v) & 1; }
inline bool subset(VarSet a, VarSet b) { return (a & ~b) == 0; }

enum class AggFn { Count, CountD, Sum, Avg, Min, Max };

std::string_view to_string(AggFn fn);

struct HeadEntry {
    enum class Kind { Var, Star, Agg };
    Kind kind = Kind::Var;
    int var = -1;  // Var: the variable; Agg: the argument (-1 for Count)
    AggFn fn = AggFn::Count;

    static HeadEntry variable(int v) { return {Kind::Var, v, AggFn::Count}; }
    static HeadEntry star() { return {Kind::Star, -1, AggFn::Count}; }
    static HeadEntry aggregate(AggFn f, int arg) { return {Kind::Agg, arg, f}; }
};

struct Atom {
    std::string relation;
    std::vector<int> vars;
};

struct Query {
    std::string name = "Q";
    std::vector<std::string> var_names;
    std::vector<HeadEntry> head;
    std::vector<Atom> body;
    /// Variables whose cells hold semiring values (added by rewrites).
    VarSet value_vars = 0;

    int var_id(std::string_view name) const;  // -1 when absent
    int add_var(std::string name);

    VarSet atom_vars(std::size_t i) const;
    VarSet all_vars() const;
    VarSet free_vars() const;
    VarSet existential_vars() const { return all_vars() & ~free_vars(); }
    std::vector<int> head_vars() const;
    std::optional<std::size_t> star_position() const;
    bool has_star() const;
    std::size_t aggregate_count() const;
    bool is_full() const { return existential_vars() == 0; }
    bool self_join_free() const;
    /// Head variables before and after the computed-value slot.
    std::vector<int> vars_before_star() const;
    std::vector<int> vars_after_star() const;
    int atom_of(std::string_view relation) const;  // first atom using it, or -1
};

/// Parses `Head :- Atom, ... .` and validates it.
Query parse_query(std::string_view text);
void validate(const Query& q);
std::string to_string(const Query& q);
std::string var_list(const Query& q, VarSet s);

}  // namespace dacq
