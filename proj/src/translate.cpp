#include "dacq/translate.hpp"

#include "dacq/error.hpp"

#include <bit>
#include <fstream>
#include <unordered_set>

namespace dacq {

namespace {

std::vector<std::size_t> aggregate_positions(const Query& q) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < q.head.size(); ++i)
        if (q.head[i].kind == HeadEntry::Kind::Agg) out.push_back(i);
    return out;
}

SemiringKind kind_for(AggFn fn, const std::optional<std::vector<Const>>& domain) {
    switch (fn) {
    case AggFn::Count: return {Kind::Counting, {}};
    case AggFn::Sum: return {Kind::Numeric, {}};
    case AggFn::Min: return {Kind::MinTropical, {}};
    case AggFn::Max: return {Kind::MaxTropical, {}};
    case AggFn::Avg: return {Kind::Avg, {}};
    case AggFn::CountD:
        if (!domain) throw Error(ErrorCode::MissingDomain, "CountD needs a declared domain");
        return {Kind::Set, *domain};
    }
    return {};
}

}  // namespace

Translation translate_acq(const Query& acq, std::size_t which, const std::optional<std::vector<Const>>& domain,
                          std::optional<AggFn> as) {
    auto positions = aggregate_positions(acq);
    if (which >= positions.size()) throw Error(ErrorCode::Semantic, "query has no such aggregate");
    const HeadEntry& agg = acq.head[positions[which]];
    AggFn fn = as.value_or(agg.fn);

    Translation t;
    t.query = acq;
    t.query.head.clear();
    for (std::size_t i = 0; i < acq.head.size(); ++i) {
        if (acq.head[i].kind == HeadEntry::Kind::Var) t.query.head.push_back(acq.head[i]);
        else if (i == positions[which]) t.query.head.push_back(HeadEntry::star());
    }
    t.kind = kind_for(fn, domain);
    t.rule.fn = fn;
    if (fn == AggFn::Count) return t;

    int w = agg.var;
    int best = -1;
    for (std::size_t i = 0; i < acq.body.size(); ++i) {
        if (!has(acq.atom_vars(i), w)) continue;
        if (best < 0 || std::popcount(acq.atom_vars(i)) < std::popcount(acq.atom_vars(best))) best = static_cast<int>(i);
    }
    if (best < 0) throw Error(ErrorCode::Semantic, "aggregate argument occurs in no atom");
    Atom& carrier = t.query.body[best];
    t.rule.atom = best;
    t.rule.source = carrier.relation;
    t.rule.relation = carrier.relation;
    for (std::size_t j = 0; j < carrier.vars.size(); ++j)
        if (carrier.vars[j] == w) {
            t.rule.column = j;
            break;
        }
    bool shared = false;
    for (std::size_t i = 0; i < acq.body.size(); ++i)
        if (static_cast<int>(i) != best && acq.body[i].relation == carrier.relation) shared = true;
    if (shared) {
        t.rule.relation = carrier.relation + "__agg";
        carrier.relation = t.rule.relation;
    }
    return t;
}

AnnotatedDatabase annotate_with_rule(const Translation& t, const std::vector<RawRelation>& relations,
                                     std::size_t set_bound) {
    Semiring s = Semiring::instantiate(t.kind, set_bound);
    AnnotatedDatabase db;
    db.semiring = s;
    for (const auto& raw : relations) {
        Relation r = raw.relation;
        r.annotations.assign(r.rows, s.one());
        db.relations[r.name] = std::move(r);
    }
    if (t.rule.fn != AggFn::Count) {
        auto it = db.relations.find(t.rule.source);
        if (it == db.relations.end()) throw Error(ErrorCode::Semantic, "missing relation " + t.rule.source);
        Relation carrier = it->second;
        carrier.name = t.rule.relation;
        if (t.rule.column >= carrier.arity)
            throw Error(ErrorCode::ArityMismatch, "relation " + carrier.name + " is too narrow for its atom");
        for (std::size_t i = 0; i < carrier.rows; ++i) {
            Const w = carrier.row(i)[t.rule.column];
            if (t.rule.fn == AggFn::CountD) {
                carrier.annotations[i] = s.singleton(w);
                continue;
            }
            auto v = const_value(w);
            if (!v)
                throw Error(ErrorCode::AnnotationParse,
                            "aggregate argument '" + const_text(w) + "' in " + carrier.name + " is not a number");
            carrier.annotations[i] = s.lift(*v);
        }
        db.relations[carrier.name] = std::move(carrier);
    }
    db.refresh_profile();
    return db;
}

Semiring output_semiring(AggFn fn) {
    switch (fn) {
    case AggFn::Count:
    case AggFn::CountD: return Semiring::instantiate({Kind::Counting, {}});
    case AggFn::Sum:
    case AggFn::Avg: return Semiring::instantiate({Kind::Numeric, {}});
    case AggFn::Min: return Semiring::instantiate({Kind::MinTropical, {}});
    case AggFn::Max: return Semiring::instantiate({Kind::MaxTropical, {}});
    }
    return Semiring::instantiate({});
}

Value finalize(AggFn fn, const Value& v) {
    switch (fn) {
    case AggFn::CountD: return Integer(std::popcount(std::get<SetBits>(v).bits));
    case AggFn::Avg: {
        const auto& p = std::get<AvgPair>(v);
        if (p.count == 0) return Rational(0);
        return Rational(p.sum / Rational(p.count));
    }
    default: return v;
    }
}

std::vector<Const> read_domain_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::vector<Const> out;
    std::unordered_set<Const> seen;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        Const c = intern(line.substr(b, e - b + 1));
        if (!seen.insert(c).second) throw Error(ErrorCode::Semantic, "duplicate domain constant " + const_text(c));
        out.push_back(c);
    }
    return out;
}

}  // namespace dacq
