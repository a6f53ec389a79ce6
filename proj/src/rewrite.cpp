#include "dacq/rewrite.hpp"

#include "dacq/error.hpp"
#include "dacq/tuple_index.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <queue>

namespace dacq {

namespace {

std::vector<int> vars_of(VarSet s) {
    std::vector<int> out;
    for (int v = 0; v < kMaxVars; ++v)
        if (has(s, v)) out.push_back(v);
    return out;
}

std::vector<std::size_t> positions_of(const Atom& a, const std::vector<int>& vars) {
    std::vector<std::size_t> out;
    for (int v : vars) {
        auto it = std::find(a.vars.begin(), a.vars.end(), v);
        if (it == a.vars.end()) throw Error(ErrorCode::Semantic, "internal: variable missing from atom");
        out.push_back(static_cast<std::size_t>(it - a.vars.begin()));
    }
    return out;
}

void gather(const Relation& r, std::size_t row, const std::vector<std::size_t>& cols, std::vector<Const>& key) {
    key.resize(cols.size());
    const Const* cells = r.row(row);
    for (std::size_t i = 0; i < cols.size(); ++i) key[i] = cells[cols[i]];
}

/// Keeps rows of `target` that agree with some row of `source` on shared vars.
void semijoin(Relation& target, const Atom& ta, const Relation& source, const Atom& sa) {
    VarSet tv = 0, sv = 0;
    for (int v : ta.vars) tv |= bit(v);
    for (int v : sa.vars) sv |= bit(v);
    auto shared = vars_of(tv & sv);
    auto tcols = positions_of(ta, shared);
    auto scols = positions_of(sa, shared);
    TupleIndex keys(shared.size(), source.rows);
    std::vector<Const> key;
    for (std::size_t i = 0; i < source.rows; ++i) {
        gather(source, i, scols, key);
        keys.insert(key.data());
    }
    std::size_t kept = 0;
    for (std::size_t i = 0; i < target.rows; ++i) {
        gather(target, i, tcols, key);
        if (keys.find(key.data()) < 0) continue;
        if (kept != i) {
            std::copy_n(target.row(i), target.arity, target.cells.begin() + kept * target.arity);
            target.annotations[kept] = std::move(target.annotations[i]);
        }
        ++kept;
    }
    target.rows = kept;
    target.cells.resize(kept * target.arity);
    target.annotations.resize(kept);
}

}  // namespace

Instance make_self_join_free(const Query& q, const AnnotatedDatabase& db) {
    Instance out;
    out.query = q;
    out.db.semiring = db.semiring;
    out.db.value_pool = db.value_pool;
    std::map<std::string, int> uses;
    for (const auto& a : q.body) ++uses[a.relation];
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < q.body.size(); ++i) {
        const Atom& a = q.body[i];
        const Relation& src = db.at(a.relation);
        if (src.arity != a.vars.size())
            throw Error(ErrorCode::ArityMismatch, "atom " + a.relation + " has " + std::to_string(a.vars.size()) +
                                                      " terms but the relation has arity " +
                                                      std::to_string(src.arity));
        std::string name = a.relation;
        if (uses[a.relation] > 1) name = a.relation + "#" + std::to_string(++seen[a.relation]);
        std::vector<int> distinct;
        for (int v : a.vars)
            if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
        Relation r;
        r.name = name;
        r.arity = distinct.size();
        if (distinct.size() == a.vars.size()) {
            r.cells = src.cells;
            r.annotations = src.annotations;
            r.rows = src.rows;
        } else {
            std::vector<std::size_t> first(a.vars.size());
            for (std::size_t j = 0; j < a.vars.size(); ++j)
                first[j] = static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), a.vars[j]) -
                                                    distinct.begin());
            std::vector<Const> row(distinct.size());
            for (std::size_t i2 = 0; i2 < src.rows; ++i2) {
                const Const* cells = src.row(i2);
                bool ok = true;
                for (std::size_t j = 0; j < a.vars.size() && ok; ++j) {
                    auto pos = std::find(a.vars.begin(), a.vars.end(), a.vars[j]) - a.vars.begin();
                    if (cells[pos] != cells[j]) ok = false;
                    row[first[j]] = cells[j];
                }
                if (ok) r.add(row.data(), src.annotations[i2]);
            }
        }
        out.query.body[i].relation = name;
        out.query.body[i].vars = distinct;
        out.db.relations[name] = std::move(r);
    }
    out.db.refresh_profile();
    return out;
}

AnnotatedDatabase full_reduce(const Query& q, const AnnotatedDatabase& db) {
    auto gyo = gyo_acyclic(hypergraph_of(q));
    if (!std::holds_alternative<JoinTree>(gyo)) throw Error(ErrorCode::Cyclic, "full reduction needs an acyclic query");
    const JoinTree& t = std::get<JoinTree>(gyo);
    AnnotatedDatabase out = db;
    if (q.body.empty()) return out;
    auto adj = t.adjacency();
    std::vector<int> order;
    std::vector<int> parent(t.nodes.size(), -1);
    std::vector<bool> seen(t.nodes.size(), false);
    for (std::size_t root = 0; root < t.nodes.size(); ++root) {
        if (seen[root]) continue;
        std::queue<int> bfs;
        bfs.push(static_cast<int>(root));
        seen[root] = true;
        while (!bfs.empty()) {
            int u = bfs.front();
            bfs.pop();
            order.push_back(u);
            for (int w : adj[u])
                if (!seen[w]) {
                    seen[w] = true;
                    parent[w] = u;
                    bfs.push(w);
                }
        }
    }
    auto rel = [&](int node) -> Relation& { return out.at(q.body[node].relation); };
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (parent[*it] >= 0) semijoin(rel(parent[*it]), q.body[parent[*it]], rel(*it), q.body[*it]);
    for (int u : order)
        if (parent[u] >= 0) semijoin(rel(u), q.body[u], rel(parent[u]), q.body[parent[u]]);
    // Disconnected components: an empty component empties everything.
    bool any_empty = std::any_of(q.body.begin(), q.body.end(),
                                 [&](const Atom& a) { return out.at(a.relation).rows == 0; });
    if (any_empty)
        for (const auto& a : q.body) {
            Relation& r = out.at(a.relation);
            r.cells.clear();
            r.annotations.clear();
            r.rows = 0;
        }
    return out;
}

EliminationPlan plan_elimination(const Query& q, ExtTree tree) {
    EliminationPlan plan;
    plan.tree = std::move(tree);
    const JoinTree& t = plan.tree.tree;
    std::size_t n = t.nodes.size();
    plan.node_relation.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        plan.node_relation[i] = t.nodes[i].atom >= 0 ? q.body[t.nodes[i].atom].relation : "ext__" + std::to_string(i);

    auto adj = t.adjacency();
    std::vector<std::size_t> degree(n);
    for (std::size_t i = 0; i < n; ++i) degree[i] = adj[i].size();
    std::vector<bool> gone(n, false);
    while (true) {
        int leaf = -1;
        for (std::size_t i = 0; i < n; ++i)
            if (!gone[i] && !t.nodes[i].free && degree[i] <= 1) {
                leaf = static_cast<int>(i);
                break;
            }
        if (leaf < 0) break;
        int into = -1;
        for (int w : adj[leaf])
            if (!gone[w]) into = w;
        if (into < 0) throw Error(ErrorCode::NotFreeConnex, "internal: isolated non-free node");
        plan.steps.emplace_back(leaf, into);
        gone[leaf] = true;
        --degree[into];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!gone[i] && !t.nodes[i].free) throw Error(ErrorCode::NotFreeConnex, "internal: non-free node left");

    plan.full = q;
    plan.full.body.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (!t.nodes[i].free) continue;
        Atom a;
        a.relation = plan.node_relation[i];
        if (t.nodes[i].atom >= 0 && q.atom_vars(t.nodes[i].atom) == t.nodes[i].vars) a.vars = q.body[t.nodes[i].atom].vars;
        else a.vars = vars_of(t.nodes[i].vars);
        plan.full.body.push_back(std::move(a));
        plan.full_nodes.push_back(static_cast<int>(i));
    }
    return plan;
}

Instance apply_elimination(const EliminationPlan& plan, const Instance& in) {
    const Query& q = in.query;
    const Semiring& s = in.db.semiring;
    const JoinTree& t = plan.tree.tree;
    std::size_t n = t.nodes.size();
    std::vector<Relation> rels(n);
    std::vector<Atom> shape(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = t.nodes[i];
        shape[i].relation = plan.node_relation[i];
        if (node.atom >= 0 && q.atom_vars(node.atom) == node.vars) {
            shape[i].vars = q.body[node.atom].vars;
            rels[i] = in.db.at(q.body[node.atom].relation);
            rels[i].name = plan.node_relation[i];
            continue;
        }
        shape[i].vars = vars_of(node.vars);
        int source = -1;
        for (std::size_t a = 0; a < q.body.size(); ++a) {
            if (!subset(node.vars, q.atom_vars(a))) continue;
            if (source < 0 || in.db.at(q.body[a].relation).rows < in.db.at(q.body[source].relation).rows)
                source = static_cast<int>(a);
        }
        if (source < 0) throw Error(ErrorCode::Semantic, "internal: extension node outside every atom");
        const Relation& src = in.db.at(q.body[source].relation);
        auto cols = positions_of(q.body[source], shape[i].vars);
        Relation r;
        r.name = plan.node_relation[i];
        r.arity = cols.size();
        TupleIndex seen(cols.size(), src.rows);
        std::vector<Const> key;
        for (std::size_t row = 0; row < src.rows; ++row) {
            gather(src, row, cols, key);
            if (seen.insert(key.data()).second) r.add(key.data(), s.one());
        }
        rels[i] = std::move(r);
    }

    for (auto [leaf, into] : plan.steps) {
        VarSet shared_set = t.nodes[leaf].vars & t.nodes[into].vars;
        auto shared = vars_of(shared_set);
        auto lcols = positions_of(shape[leaf], shared);
        auto icols = positions_of(shape[into], shared);
        const Relation& lr = rels[leaf];
        TupleIndex groups(shared.size(), lr.rows);
        std::vector<Value> sums;
        std::vector<Const> key;
        for (std::size_t row = 0; row < lr.rows; ++row) {
            gather(lr, row, lcols, key);
            auto [id, fresh] = groups.insert(key.data());
            if (fresh) sums.push_back(lr.annotations[row]);
            else sums[id] = s.plus(sums[id], lr.annotations[row]);
        }
        Relation& ir = rels[into];
        std::size_t kept = 0;
        for (std::size_t row = 0; row < ir.rows; ++row) {
            gather(ir, row, icols, key);
            auto id = groups.find(key.data());
            if (id < 0) continue;
            if (kept != row) std::copy_n(ir.row(row), ir.arity, ir.cells.begin() + kept * ir.arity);
            ir.annotations[kept] = s.times(ir.annotations[row], sums[id]);
            ++kept;
        }
        ir.rows = kept;
        ir.cells.resize(kept * ir.arity);
        ir.annotations.resize(kept);
        rels[leaf] = Relation{};
    }

    Instance out;
    out.query = plan.full;
    out.db.semiring = s;
    out.db.value_pool = in.db.value_pool;
    for (int node : plan.full_nodes) out.db.relations[rels[node].name] = std::move(rels[node]);
    out.db.refresh_profile();
    return out;
}

namespace {

EliminationPlan default_plan(const Query& q) {
    Hypergraph h = hypergraph_of(q);
    std::optional<ExtTree> ext = is_acyclic(h) ? ext_connex_tree(h, q.free_vars()) : std::nullopt;
    if (!ext) throw Error(ErrorCode::NotFreeConnex, "query is not free-connex");
    return plan_elimination(q, std::move(*ext));
}

}  // namespace

Instance eliminate_existentials(const Instance& in) {
    if (in.query.is_full()) return in;
    return apply_elimination(default_plan(in.query), in);
}

Query eliminated_shape(const Query& q) {
    if (q.is_full()) return q;
    return default_plan(q).full;
}

namespace {

EliminationPlan anchored_plan(const Query& q, const std::string& relation, std::string& carrier) {
    int atom = q.atom_of(relation);
    if (atom < 0) throw Error(ErrorCode::NotLocallyAnnotated, "relation " + relation + " is not in the query");
    AnchoredTree anchored = anchored_ext_tree(q, static_cast<std::size_t>(atom));
    int root = anchored.path.back();
    EliminationPlan plan = plan_elimination(q, std::move(anchored.ext));
    carrier = plan.node_relation[root];
    return plan;
}

}  // namespace

IdempotentResult idempotent_eliminate(const Instance& in, const std::string& relation) {
    if (!in.db.semiring.plus_idempotent())
        throw Error(ErrorCode::NotIdempotent, in.db.semiring.name() + " addition is not idempotent");
    if (!in.query.self_join_free()) throw Error(ErrorCode::SelfJoin, "idempotent elimination needs a self-join-free query");
    if (!in.db.all_one && in.db.annotated_relation != relation)
        throw Error(ErrorCode::NotLocallyAnnotated, "database is not " + relation + "-annotated");
    if (in.query.is_full()) return {in, relation};
    std::string carrier;
    EliminationPlan plan = anchored_plan(in.query, relation, carrier);
    IdempotentResult out{apply_elimination(plan, in), carrier};
    if (!out.instance.db.all_one && out.instance.db.annotated_relation != carrier)
        throw Error(ErrorCode::NotLocallyAnnotated, "internal: annotations escaped " + carrier);
    return out;
}

std::pair<Query, std::string> idempotent_shape(const Query& q, const std::string& relation) {
    if (q.is_full()) return {q, relation};
    std::string carrier;
    EliminationPlan plan = anchored_plan(q, relation, carrier);
    return {plan.full, carrier};
}

namespace {

std::pair<Atom, VarSet> private_projection(const Query& q, int atom) {
    VarSet others = q.free_vars();
    for (std::size_t i = 0; i < q.body.size(); ++i)
        if (static_cast<int>(i) != atom) others |= q.atom_vars(i);
    Atom a = q.body[atom];
    VarSet dropped = q.atom_vars(atom) & ~others;
    std::erase_if(a.vars, [&](int v) { return has(dropped, v); });
    return {a, dropped};
}

}  // namespace

Query project_private_shape(const Query& q, const std::string& relation) {
    int atom = q.atom_of(relation);
    if (atom < 0) throw Error(ErrorCode::Semantic, "relation " + relation + " is not in the query");
    Query out = q;
    out.body[atom] = private_projection(q, atom).first;
    return out;
}

Instance project_private(const Instance& in, const std::string& relation) {
    int atom = in.query.atom_of(relation);
    if (atom < 0) throw Error(ErrorCode::Semantic, "relation " + relation + " is not in the query");
    auto [projected, dropped] = private_projection(in.query, atom);
    Instance out = in;
    if (dropped == 0) return out;
    const Relation& src = in.db.at(relation);
    auto cols = positions_of(in.query.body[atom], projected.vars);
    TupleIndex groups(cols.size(), src.rows);
    std::vector<Const> key;
    Relation r;
    r.name = relation;
    r.arity = cols.size();
    for (std::size_t row = 0; row < src.rows; ++row) {
        gather(src, row, cols, key);
        auto [id, fresh] = groups.insert(key.data());
        if (fresh) {
            r.add(key.data(), src.annotations[row]);
        } else {
            r.annotations[id] = in.db.semiring.plus(r.annotations[id], src.annotations[row]);
        }
    }
    out.query.body[atom] = projected;
    out.db.relations[relation] = std::move(r);
    out.db.refresh_profile();
    return out;
}

Query deannotate(const Query& q, const std::string& relation) {
    int atom = q.atom_of(relation);
    if (atom < 0) throw Error(ErrorCode::Semantic, "relation " + relation + " is not in the query");
    Query out = q;
    int y = out.add_var(kAnnotationVar);
    out.value_vars |= bit(y);
    auto star = q.star_position();
    if (!star) throw Error(ErrorCode::Semantic, "deannotation needs a * in the head");
    out.head[*star] = HeadEntry::variable(y);
    VarSet rv = q.atom_vars(atom);
    VarSet before = 0;
    for (int v : q.vars_before_star()) before |= bit(v);
    if (subset(rv, before)) {
        out.head.erase(out.head.begin() + static_cast<long>(*star));
        std::size_t insert_at = 0;
        for (std::size_t i = 0; i < out.head.size(); ++i)
            if (out.head[i].kind == HeadEntry::Kind::Var && has(rv, out.head[i].var)) insert_at = i + 1;
        out.head.insert(out.head.begin() + static_cast<long>(insert_at), HeadEntry::variable(y));
    }
    for (std::size_t i = 0; i < out.body.size(); ++i)
        if (subset(rv, q.atom_vars(i))) out.body[i].vars.push_back(y);
    return out;
}

Instance extend_with_annotation_var(const Instance& in, const std::string& relation) {
    if (!in.db.all_one && in.db.annotated_relation != relation)
        throw Error(ErrorCode::NotLocallyAnnotated, "database is not " + relation + "-annotated");
    const Query& q = in.query;
    int atom = q.atom_of(relation);
    Instance out;
    out.query = deannotate(q, relation);
    out.db.semiring = in.db.semiring;
    out.db.value_pool = in.db.value_pool;
    const Relation& r = in.db.at(relation);
    const Atom& ra = q.body[atom];
    std::vector<int> rvars = ra.vars;
    TupleIndex by_key(rvars.size(), r.rows);
    std::vector<std::uint32_t> pool_of(r.rows);
    for (std::size_t row = 0; row < r.rows; ++row) {
        by_key.insert(r.row(row));
        pool_of[row] = static_cast<std::uint32_t>(out.db.value_pool.size());
        out.db.value_pool.push_back(r.annotations[row]);
    }
    VarSet rv = q.atom_vars(atom);
    std::vector<Const> key;
    std::vector<Const> widened;
    for (std::size_t i = 0; i < q.body.size(); ++i) {
        const Relation& src = in.db.at(q.body[i].relation);
        if (!subset(rv, q.atom_vars(i))) {
            out.db.relations[src.name] = src;
            continue;
        }
        auto cols = positions_of(q.body[i], rvars);
        Relation w;
        w.name = src.name;
        w.arity = src.arity + 1;
        for (std::size_t row = 0; row < src.rows; ++row) {
            gather(src, row, cols, key);
            auto id = by_key.find(key.data());
            if (id < 0) continue;
            widened.assign(src.row(row), src.row(row) + src.arity);
            widened.push_back(pool_of[static_cast<std::size_t>(id)]);
            w.add(widened.data(), src.annotations[row]);
        }
        out.db.relations[w.name] = std::move(w);
    }
    out.db.refresh_profile();
    return out;
}

bool z_block_condition(const Query& q) {
    VarSet z = 0;
    for (int v : q.vars_after_star()) z |= bit(v);
    for (std::size_t i = 0; i < q.body.size(); ++i) {
        VarSet inter = q.atom_vars(i) & z;
        if (inter != 0 && inter != z) return false;
    }
    return true;
}

namespace {

struct YSplit {
    std::vector<int> after;  // atoms not inside x
    int phi = -1;
};

YSplit split_for_y(const Query& q) {
    if (!z_block_condition(q))
        throw Error(ErrorCode::ZBlockViolation, "an atom holds some but not all variables after *");
    VarSet x = 0;
    for (int v : q.vars_before_star()) x |= bit(v);
    YSplit split;
    VarSet after_vars = 0;
    for (std::size_t i = 0; i < q.body.size(); ++i)
        if (!subset(q.atom_vars(i), x)) {
            split.after.push_back(static_cast<int>(i));
            after_vars |= q.atom_vars(i);
        }
    for (int i : split.after)
        if (subset(after_vars, q.atom_vars(i))) {
            split.phi = i;
            break;
        }
    if (split.phi < 0 && !split.after.empty())
        throw Error(ErrorCode::DisruptiveTrio, "no atom covers the variables after the x-prefix");
    return split;
}

}  // namespace

Query extend_with_y_shape(const Query& q) {
    YSplit split = split_for_y(q);
    Query out = q;
    int y = out.add_var(kAnnotationVar);
    out.value_vars |= bit(y);
    out.head.clear();
    for (int v : q.vars_before_star()) out.head.push_back(HeadEntry::variable(v));
    out.head.push_back(HeadEntry::variable(y));
    for (int v : q.vars_after_star()) out.head.push_back(HeadEntry::variable(v));
    out.head.push_back(HeadEntry::star());
    if (split.phi >= 0) out.body[split.phi].vars.push_back(y);
    return out;
}

Instance extend_with_y(const Instance& in) {
    const Query& q = in.query;
    YSplit split = split_for_y(q);
    Instance out;
    out.query = extend_with_y_shape(q);
    out.db = in.db;
    if (split.phi < 0) return out;
    const Semiring& s = in.db.semiring;
    const Atom& phi = q.body[split.phi];
    const Relation& pr = in.db.at(phi.relation);
    struct Lookup {
        const Relation* rel;
        std::vector<std::size_t> cols;
        TupleIndex index;
    };
    std::vector<Lookup> lookups;
    for (int i : split.after) {
        if (i == split.phi) continue;
        const Relation& r = in.db.at(q.body[i].relation);
        Lookup l{&r, positions_of(phi, q.body[i].vars), TupleIndex(r.arity, r.rows)};
        for (std::size_t row = 0; row < r.rows; ++row) l.index.insert(r.row(row));
        lookups.push_back(std::move(l));
    }
    Relation w;
    w.name = pr.name;
    w.arity = pr.arity + 1;
    std::vector<Const> key;
    std::vector<Const> widened;
    for (std::size_t row = 0; row < pr.rows; ++row) {
        Value y = pr.annotations[row];
        bool ok = true;
        for (auto& l : lookups) {
            gather(pr, row, l.cols, key);
            auto id = l.index.find(key.data());
            if (id < 0) {
                ok = false;
                break;
            }
            y = s.times(y, l.rel->annotations[static_cast<std::size_t>(id)]);
        }
        if (!ok) continue;
        widened.assign(pr.row(row), pr.row(row) + pr.arity);
        widened.push_back(static_cast<Const>(out.db.value_pool.size()));
        out.db.value_pool.push_back(std::move(y));
        w.add(widened.data(), pr.annotations[row]);
    }
    out.db.relations[w.name] = std::move(w);
    return out;
}

}  // namespace dacq
