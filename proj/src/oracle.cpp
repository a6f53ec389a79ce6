#include "dacq/oracle.hpp"

#include "dacq/error.hpp"
#include "dacq/translate.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace dacq {

namespace {

constexpr Const kUnbound = ~Const{0};

struct Search {
    const Query& q;
    const AnnotatedDatabase& db;
    std::size_t limit;
    std::size_t visited = 0;
    std::vector<Const> assignment;
    std::vector<const Relation*> relations;
    std::vector<std::size_t> used;  // chosen row per atom

    template <class Visit>
    void run(std::size_t atom, Visit& visit) {
        if (atom == q.body.size()) {
            visit(assignment, used);
            return;
        }
        const Atom& a = q.body[atom];
        const Relation& r = *relations[atom];
        for (std::size_t row = 0; row < r.rows; ++row) {
            std::vector<std::pair<int, Const>> bound;
            bool ok = true;
            for (std::size_t c = 0; c < a.vars.size() && ok; ++c) {
                Const v = r.row(row)[c];
                Const& slot = assignment[a.vars[c]];
                if (slot == kUnbound) {
                    slot = v;
                    bound.emplace_back(a.vars[c], v);
                } else if (slot != v) {
                    ok = false;
                }
            }
            if (ok) {
                if (++visited > limit)
                    throw Error(ErrorCode::InstanceTooLarge,
                                "more than " + std::to_string(limit) + " partial homomorphisms");
                used[atom] = row;
                run(atom + 1, visit);
            }
            for (auto& [v, c] : bound) assignment[v] = kUnbound;
        }
    }
};

struct Group {
    std::vector<Const> key;
    Value annotation;
    std::vector<Const> args;  // aggregate arguments, one per homomorphism and aggregate
};

Value aggregate(AggFn fn, const std::vector<Const>& bag) {
    switch (fn) {
    case AggFn::Count: return Integer(bag.size());
    case AggFn::CountD: {
        std::set<Const> distinct(bag.begin(), bag.end());
        return Integer(distinct.size());
    }
    default: break;
    }
    std::vector<Rational> xs;
    for (Const c : bag) {
        auto v = const_value(c);
        if (!v) throw Error(ErrorCode::AnnotationParse, "aggregate argument '" + const_text(c) + "' is not a number");
        xs.push_back(*v);
    }
    switch (fn) {
    case AggFn::Sum: return std::accumulate(xs.begin(), xs.end(), Rational(0));
    case AggFn::Avg: return Rational(std::accumulate(xs.begin(), xs.end(), Rational(0)) / Rational(xs.size()));
    case AggFn::Min: return Tropical{false, *std::min_element(xs.begin(), xs.end())};
    case AggFn::Max: return Tropical{false, *std::max_element(xs.begin(), xs.end())};
    default: break;
    }
    return Integer(0);
}

}  // namespace

OracleResult brute_force(const Query& q, const AnnotatedDatabase& db, std::size_t limit) {
    Search search{q, db, limit, 0, std::vector<Const>(q.var_names.size(), kUnbound), {}, std::vector<std::size_t>(q.body.size())};
    for (const auto& a : q.body) {
        const Relation& r = db.at(a.relation);
        if (r.arity != a.vars.size()) throw Error(ErrorCode::ArityMismatch, "atom " + a.relation + " has the wrong arity");
        search.relations.push_back(&r);
    }
    std::vector<int> head_vars;
    std::vector<std::size_t> agg_positions;
    for (std::size_t i = 0; i < q.head.size(); ++i) {
        if (q.head[i].kind == HeadEntry::Kind::Var) head_vars.push_back(q.head[i].var);
        if (q.head[i].kind == HeadEntry::Kind::Agg) agg_positions.push_back(i);
    }
    const Semiring& s = db.semiring;
    std::map<std::vector<Const>, std::size_t> index;
    std::vector<Group> groups;
    auto visit = [&](const std::vector<Const>& h, const std::vector<std::size_t>& used) {
        std::vector<Const> key;
        for (int v : head_vars) key.push_back(h[v]);
        auto [it, fresh] = index.try_emplace(key, groups.size());
        if (fresh) groups.push_back({key, s.zero(), {}});
        Group& g = groups[it->second];
        Value product = s.one();
        for (std::size_t a = 0; a < used.size(); ++a)
            product = s.times(product, search.relations[a]->annotations[used[a]]);
        g.annotation = s.plus(g.annotation, product);
        for (std::size_t p : agg_positions) g.args.push_back(q.head[p].var >= 0 ? h[q.head[p].var] : 0);
    };
    search.run(0, visit);

    OracleResult out;
    std::vector<Answer> answers;
    std::vector<Value> values;
    for (auto& g : groups) {
        Answer a;
        std::size_t next = 0;
        std::vector<Value> computed;
        for (std::size_t k = 0; k < agg_positions.size(); ++k) {
            std::vector<Const> bag;
            for (std::size_t j = k; j < g.args.size(); j += agg_positions.size()) bag.push_back(g.args[j]);
            computed.push_back(aggregate(q.head[agg_positions[k]].fn, bag));
        }
        std::size_t agg = 0;
        std::optional<Value> first;
        for (const auto& e : q.head) {
            switch (e.kind) {
            case HeadEntry::Kind::Var: a.push_back(g.key[next++]); break;
            case HeadEntry::Kind::Star:
                a.push_back(g.annotation);
                if (!first) first = g.annotation;
                break;
            case HeadEntry::Kind::Agg:
                a.push_back(computed[agg]);
                if (!first) first = computed[agg];
                ++agg;
                break;
            }
        }
        answers.push_back(std::move(a));
        values.push_back(first.value_or(s.one()));
    }
    AnswerOrder order(q, s);
    std::vector<std::size_t> idx(answers.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return order.less(answers[x], answers[y]); });
    for (std::size_t i : idx) {
        out.answers.push_back(std::move(answers[i]));
        out.values.push_back(std::move(values[i]));
    }
    return out;
}

OracleResult brute_force_count_product(const Query& q, const AnnotatedDatabase& db, std::size_t limit) {
    OracleResult r = brute_force(q, db, limit);
    const Atom& atom = q.body.at(0);
    const Relation& left = db.at(atom.relation);
    std::size_t col = static_cast<std::size_t>(std::find(atom.vars.begin(), atom.vars.end(), q.head.at(1).var) -
                                               atom.vars.begin());
    std::map<Const, std::size_t> occurrences;
    for (std::size_t i = 0; i < left.rows; ++i) ++occurrences[left.row(i)[col]];
    AnswerOrder order(q, db.semiring);
    std::vector<std::size_t> idx(r.answers.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key_x = [&](const Answer& a) { return occurrences[std::get<Const>(a[1])]; };
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        const Answer& a = r.answers[x];
        const Answer& b = r.answers[y];
        int c = order.positions()[0]->compare(std::get<Value>(a[0]), std::get<Value>(b[0]));
        if (c != 0) return c < 0;
        if (key_x(a) != key_x(b)) return key_x(a) < key_x(b);
        return order.less(a, b);
    });
    OracleResult out;
    for (std::size_t i : idx) {
        out.answers.push_back(r.answers[i]);
        out.values.push_back(r.values[i]);
    }
    return out;
}

}  // namespace dacq
