#include "dacq/planner.hpp"

#include "dacq/error.hpp"
#include "dacq/translate.hpp"

#include <algorithm>
#include <map>

namespace dacq {

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Tractable: return "Tractable";
    case Verdict::Intractable: return "Intractable";
    case Verdict::Unknown: return "Unknown";
    }
    return "";
}

std::string to_string(PlanTag t) {
    switch (t) {
    case PlanTag::StarLast: return "StarLast";
    case PlanTag::ZBlockMonotone: return "ZBlockMonotone";
    case PlanTag::FullDeannotate: return "FullDeannotate";
    case PlanTag::IdempotentLocal: return "IdempotentLocal";
    case PlanTag::CountProduct: return "CountProduct";
    case PlanTag::MultiAggregateStarLast: return "MultiAggregateStarLast";
    }
    return "";
}

nlohmann::json Certificate::to_json(const Query& q) const {
    nlohmann::json j;
    j["verdict"] = to_string(verdict);
    j["theorem"] = theorem;
    if (!reason.empty()) j["reason"] = reason;
    if (plan) {
        nlohmann::json p;
        p["tag"] = to_string(plan->tag);
        if (!plan->relation.empty()) p["relation"] = plan->relation;
        p["structure"] = plan->structure;
        if (plan->constant_star) p["constant_star"] = true;
        nlohmann::json chain = nlohmann::json::array();
        for (const auto& s : plan->chain) chain.push_back({{"step", s.tag}, {"detail", s.detail}, {"query", s.after}});
        p["chain"] = chain;
        j["plan"] = p;
    }
    if (trio) {
        j["witness"] = {{"kind", "DisruptiveTrio"},
                        {"x1", q.var_names.at(trio->x1)},
                        {"x2", q.var_names.at(trio->x2)},
                        {"x3", q.var_names.at(trio->x3)}};
    } else if (cyclic) {
        nlohmann::json residue = nlohmann::json::array();
        for (VarSet e : cyclic->residue) residue.push_back(var_list(q, e));
        j["witness"] = {{"kind", "Cyclic"}, {"residue", residue}};
    } else if (verdict == Verdict::Intractable) {
        j["witness"] = {{"kind", "Condition"}, {"condition", reason}};
    }
    return j;
}

Profile profile_of(const AnnotatedDatabase& db) {
    return Profile{db.all_one, db.annotated_relation};
}

nlohmann::json to_json(const LexStats& s) {
    return {{"sizes", s.layer_rows}, {"buckets", s.layer_buckets}, {"total", s.total}, {"depth", s.depth}};
}

namespace {

RewriteStep step(std::string tag, std::string detail, const Query& after) {
    return {std::move(tag), std::move(detail), to_string(after)};
}

Certificate tractable(PlanTag tag, std::string theorem, std::string structure, std::vector<RewriteStep> chain,
                      std::string relation = {}) {
    Certificate c;
    c.verdict = Verdict::Tractable;
    c.theorem = std::move(theorem);
    c.plan = Plan{tag, std::move(relation), std::move(structure), std::move(chain), false};
    return c;
}

Certificate intractable(std::string theorem, std::string reason) {
    Certificate c;
    c.verdict = Verdict::Intractable;
    c.theorem = std::move(theorem);
    c.reason = std::move(reason);
    return c;
}

Certificate unknown(std::string reason) {
    Certificate c;
    c.verdict = Verdict::Unknown;
    c.reason = std::move(reason);
    return c;
}

std::vector<VarSet> edges_of(const Query& q) { return hypergraph_of(q).edges; }

bool acyclic(const Query& q) { return is_acyclic(hypergraph_of(q)); }

bool free_connex(const Query& q) { return acyclic(q) && is_free_connex(q); }

/// Shape produced by make_self_join_free.
Query self_join_free_shape(const Query& q) {
    Query out = q;
    std::map<std::string, int> uses;
    for (const auto& a : q.body) ++uses[a.relation];
    std::map<std::string, int> seen;
    for (auto& a : out.body) {
        if (uses[a.relation] > 1) a.relation = a.relation + "#" + std::to_string(++seen[a.relation]);
        std::vector<int> distinct;
        for (int v : a.vars)
            if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
        a.vars = distinct;
    }
    return out;
}

bool needs_split(const Query& q) {
    if (!q.self_join_free()) return true;
    for (std::size_t i = 0; i < q.body.size(); ++i)
        if (static_cast<std::size_t>(std::popcount(q.atom_vars(i))) != q.body[i].vars.size()) return true;
    return false;
}

/// Full, acyclic, and free of disruptive trios in `order`.
bool lex_ready(const Query& f, const std::vector<int>& order, std::optional<TrioWitness>* trio = nullptr) {
    if (!f.is_full() || !acyclic(f)) return false;
    auto t = find_disruptive_trio(edges_of(f), order);
    if (trio) *trio = t;
    return !t;
}

Query without_star(const Query& q) {
    Query out = q;
    std::erase_if(out.head, [](const HeadEntry& e) { return e.kind != HeadEntry::Kind::Var; });
    return out;
}

std::vector<RewriteStep> normalize_chain(const Query& q, Query& shape) {
    std::vector<RewriteStep> chain;
    shape = q;
    if (needs_split(q)) {
        shape = self_join_free_shape(q);
        chain.push_back(step("SelfJoinSplit", "private relation copy per atom", shape));
    }
    chain.push_back(step("FullReduce", "semi-join sweeps over a join tree", shape));
    return chain;
}

/// Hardness by the dichotomy for self-join-free CQs, or Unknown.
Certificate negative(const Query& q, const std::string& fallback) {
    if (!q.self_join_free()) return unknown("self-joins: " + fallback);
    auto gyo = gyo_acyclic(hypergraph_of(q));
    if (auto* w = std::get_if<CyclicWitness>(&gyo)) {
        Certificate c = intractable("Thm 4.2(2)", "cyclic (HYPERCLIQUE)");
        c.cyclic = *w;
        return c;
    }
    if (!is_free_connex(q)) return intractable("Thm 4.2(2)", "not free-connex (SparseBMM)");
    if (auto t = find_disruptive_trio(edges_of(q), q.head_vars())) {
        Certificate c = intractable("Thm 4.2(2)", "disruptive trio (SparseBMM)");
        c.trio = t;
        return c;
    }
    return unknown(fallback);
}

std::optional<Certificate> star_last(const Query& q, bool constant_star) {
    Query base = constant_star ? without_star(q) : q;
    if (!free_connex(base)) return std::nullopt;
    Query shape;
    auto chain = normalize_chain(base, shape);
    if (!shape.is_full()) {
        shape = eliminated_shape(shape);
        chain.push_back(step("EliminateExistentials", "fold non-free nodes of an ext-free-connex tree", shape));
    }
    if (!lex_ready(shape, shape.head_vars())) return std::nullopt;
    Certificate c = tractable(PlanTag::StarLast, "Thm 4.2(1)", "lex", std::move(chain));
    c.plan->constant_star = constant_star;
    return c;
}

bool is_eq1_shape(const Query& q) {
    if (q.body.size() != 2 || q.head.size() != 3 || q.head[0].kind != HeadEntry::Kind::Star) return false;
    if (q.head[1].kind != HeadEntry::Kind::Var || q.head[2].kind != HeadEntry::Kind::Var) return false;
    if (q.body[0].vars.size() != 1 || q.body[1].vars.size() != 1) return false;
    if (q.body[0].relation == q.body[1].relation) return false;
    int x = q.head[1].var, y = q.head[2].var;
    return x != y && ((q.body[0].vars[0] == x && q.body[1].vars[0] == y) ||
                      (q.body[0].vars[0] == y && q.body[1].vars[0] == x));
}

std::vector<std::string> candidate_relations(const Query& q, const Profile& p) {
    if (p.annotated) return {*p.annotated};
    std::vector<std::string> out;
    for (const auto& a : q.body) out.push_back(a.relation);
    return out;
}

}  // namespace

Certificate classify(const Query& q, const Semiring& s, const Profile& profile) {
    if (q.aggregate_count() > 0) throw Error(ErrorCode::Semantic, "use classify_acq for aggregate queries");
    auto star = q.star_position();
    bool last = !star || *star + 1 == q.head.size();
    bool constant_star = star && !last && profile.all_one && (q.is_full() || s.plus_idempotent());

    // (b)
    if (last || constant_star) {
        if (auto c = star_last(q, constant_star)) return *c;
        return negative(without_star(q), "no positive result applies");
    }

    // (c)
    if (z_block_condition(q) && s.times_monotone() && free_connex(q)) {
        Query shape;
        auto chain = normalize_chain(q, shape);
        if (!shape.is_full()) {
            shape = eliminated_shape(shape);
            chain.push_back(step("EliminateExistentials", "fold non-free nodes of an ext-free-connex tree", shape));
        }
        bool ok = true;
        Query plus;
        try {
            plus = extend_with_y_shape(shape);
        } catch (const Error&) {
            ok = false;
        }
        if (ok && lex_ready(plus, plus.head_vars())) {
            chain.push_back(step("ExtendY", "y = product of annotations of atoms outside the x-prefix", plus));
            return tractable(PlanTag::ZBlockMonotone, "Thm 5.5", "monotone-pair", std::move(chain));
        }
    }

    bool local = profile.local() && q.self_join_free();

    // (d)
    if (local) {
        bool applied = false;
        std::optional<TrioWitness> witness;
        for (const auto& r : candidate_relations(q, profile)) {
            if (q.atom_of(r) < 0) continue;
            if (!q.is_full() && s.plus_idempotent()) continue;
            Query projected = project_private_shape(q, r);
            if (!projected.is_full()) continue;
            applied = true;
            Query deannotated = deannotate(projected, r);
            std::optional<TrioWitness> trio;
            if (lex_ready(deannotated, deannotated.head_vars(), &trio)) {
                std::vector<RewriteStep> chain{step("FullReduce", "semi-join sweeps over a join tree", q)};
                if (!q.is_full())
                    chain.push_back(step("ProjectPrivate", "sum out variables private to " + r, projected));
                chain.push_back(step("Deannotate", "annotation of " + r + " becomes variable y", deannotated));
                return tractable(PlanTag::FullDeannotate, "Thm 5.7(1)", "lex", std::move(chain), r);
            }
            if (trio) {
                witness = trio;
                // Report the trio on the original variables when y is not part of it.
                int y = deannotated.var_id(kAnnotationVar);
                if (trio->x1 == y || trio->x2 == y || trio->x3 == y) witness.reset();
            }
        }
        if (applied) {
            if (s.contains_naturals() && !profile.all_one) {
                Certificate c = intractable("Thm 5.7(2)", "deannotated query is cyclic or has a disruptive trio");
                c.trio = witness;
                return c;
            }
            return unknown("deannotation fails and no hardness result covers this semiring or profile");
        }
    }

    // (e)
    if (local && s.plus_idempotent() && free_connex(q)) {
        bool applied = false;
        std::optional<TrioWitness> witness;
        for (const auto& r : candidate_relations(q, profile)) {
            if (q.atom_of(r) < 0) continue;
            applied = true;
            auto [full, carrier] = idempotent_shape(q, r);
            Query deannotated = deannotate(full, carrier);
            std::optional<TrioWitness> trio;
            if (lex_ready(deannotated, deannotated.head_vars(), &trio)) {
                std::vector<RewriteStep> chain{step("FullReduce", "semi-join sweeps over a join tree", q)};
                chain.push_back(step("IdempotentEliminate", "anchored elimination keeps annotations in " + carrier, full));
                chain.push_back(step("Deannotate", "annotation of " + carrier + " becomes variable y", deannotated));
                return tractable(PlanTag::IdempotentLocal, "Thm 5.9(1)", "lex", std::move(chain), r);
            }
            if (trio) {
                int y = deannotated.var_id(kAnnotationVar);
                if (trio->x1 != y && trio->x2 != y && trio->x3 != y) witness = trio;
            }
        }
        if (applied) {
            if (s.contains_naturals() && !profile.all_one) {
                Certificate c = intractable("Thm 5.9(2)", "full query after elimination fails the deannotation test");
                c.trio = witness;
                return c;
            }
            return unknown("idempotent elimination fails and no hardness result covers this semiring or profile");
        }
    }

    // (f)
    bool named = s.kind() == Kind::Counting || s.kind() == Kind::Numeric || s.kind() == Kind::MinTropical ||
                 s.kind() == Kind::MaxTropical;
    if (!profile.local() && named && is_eq1_shape(q))
        return intractable("Thm 5.1", "Q(*,x,y) :- R(x),S(y) over a generic annotation (3SUM)");

    return negative(without_star(q), "interior * outside every positive and negative result");
}

bool is_count_product_shape(const Query& q) {
    if (q.head.size() != 3 || q.body.size() != 2) return false;
    if (q.head[0].kind != HeadEntry::Kind::Agg || q.head[0].fn != AggFn::Count) return false;
    if (q.head[1].kind != HeadEntry::Kind::Var || q.head[2].kind != HeadEntry::Kind::Var) return false;
    int x = q.head[1].var, y = q.head[2].var;
    const auto& r = q.body[0].vars;
    const auto& s = q.body[1].vars;
    if (r.size() != 2 || s.size() != 2) return false;
    if (std::find(r.begin(), r.end(), x) == r.end() || std::find(s.begin(), s.end(), y) == s.end()) return false;
    int w = r[0] == x ? r[1] : r[0];
    int z = s[0] == y ? s[1] : s[0];
    std::vector<int> all{x, y, w, z};
    std::sort(all.begin(), all.end());
    return std::adjacent_find(all.begin(), all.end()) == all.end();
}

namespace {

Semiring placeholder_semiring(AggFn fn) {
    SemiringKind k;
    switch (fn) {
    case AggFn::Count: k.tag = Kind::Counting; break;
    case AggFn::CountD:
        k.tag = Kind::Set;
        k.domain = {intern("\x01")};
        break;
    case AggFn::Sum: k.tag = Kind::Numeric; break;
    case AggFn::Avg: k.tag = Kind::Avg; break;
    case AggFn::Min: k.tag = Kind::MinTropical; break;
    case AggFn::Max: k.tag = Kind::MaxTropical; break;
    }
    return Semiring::instantiate(k);
}

Translation translate_for_shape(const Query& acq, std::size_t which) {
    AggFn fn = AggFn::Count;
    std::size_t seen = 0;
    for (const auto& e : acq.head)
        if (e.kind == HeadEntry::Kind::Agg && seen++ == which) fn = e.fn;
    std::optional<std::vector<Const>> domain;
    if (fn == AggFn::CountD) domain = placeholder_semiring(fn).domain();
    return translate_acq(acq, which, domain);
}

}  // namespace

Certificate classify_acq(const Query& acq, bool domain_declared) {
    if (acq.aggregate_count() == 0) throw Error(ErrorCode::Semantic, "query has no aggregate");
    if (is_count_product_shape(acq)) {
        Plan p{PlanTag::CountProduct, "", "count-product", {}, false};
        p.chain.push_back(step("CountBuckets", "occurrence counts per x and per y, buckets ordered by product", acq));
        Certificate c;
        c.verdict = Verdict::Tractable;
        c.theorem = "Prop 5.4";
        c.plan = p;
        return c;
    }
    std::size_t star = *acq.star_position();
    bool last = true;
    bool count_distinct = false;
    bool average = false;
    for (std::size_t i = star; i < acq.head.size(); ++i) {
        if (acq.head[i].kind != HeadEntry::Kind::Agg) last = false;
        else if (acq.head[i].fn == AggFn::CountD) count_distinct = true;
        else if (acq.head[i].fn == AggFn::Avg) average = true;
    }
    if (count_distinct && !domain_declared) {
        if (last) return intractable("Thm 4.4", "CountD without a bounded set-semiring domain (HSC)");
        return unknown("CountD at an interior position without a declared domain");
    }
    if (last) {
        Translation t = translate_for_shape(acq, 0);
        Certificate c = classify(t.query, Semiring::instantiate({Kind::Counting, {}}), Profile{});
        if (!c.tractable()) return c;
        std::size_t k = acq.aggregate_count();
        c.plan->chain.insert(c.plan->chain.begin(), step("TranslateACQ", "aggregates become annotations", t.query));
        if (k > 1) {
            c.plan->tag = PlanTag::MultiAggregateStarLast;
            c.plan->structure = "lex x " + std::to_string(k + (average ? 1 : 0));
        } else if (average) {
            c.plan->structure = "lex (sum) + lex (count)";
        }
        return c;
    }
    Translation t = translate_for_shape(acq, 0);
    Profile p;
    if (t.rule.fn != AggFn::Count) {
        p.all_one = false;
        p.annotated = t.rule.relation;
    }
    Certificate c = classify(t.query, placeholder_semiring(t.rule.fn), p);
    if (c.plan) c.plan->chain.insert(c.plan->chain.begin(), step("TranslateACQ", "aggregate becomes the annotation", t.query));
    return c;
}

// ---------------------------------------------------------------------------
// Engines

namespace {

struct Slot {
    enum class Kind { Cell, Computed } kind = Kind::Cell;
    std::size_t index = 0;  // cell index in the structure's order
};

Value finalize_opt(const std::optional<AggFn>& fn, const Value& v) { return fn ? finalize(*fn, v) : v; }

std::vector<Slot> slots_for(const Query& original, const std::vector<int>& order) {
    std::vector<Slot> out;
    for (const auto& e : original.head) {
        if (e.kind != HeadEntry::Kind::Var) {
            out.push_back({Slot::Kind::Computed, 0});
            continue;
        }
        auto it = std::find(order.begin(), order.end(), e.var);
        if (it == order.end()) throw Error(ErrorCode::Semantic, "internal: head variable missing from access order");
        out.push_back({Slot::Kind::Cell, static_cast<std::size_t>(it - order.begin())});
    }
    return out;
}

class LexEngine final : public Engine {
public:
    LexEngine(std::unique_ptr<LexStructure> lex, std::vector<Slot> slots, AnswerOrder order, std::optional<AggFn> fn,
              std::vector<RewriteStep> steps)
        : lex_(std::move(lex)), slots_(std::move(slots)), order_(std::move(order)), fn_(fn) {
        executed_ = std::move(steps);
    }

    Integer count() const override { return lex_->count(); }
    std::optional<Answer> get(const Integer& i) const override {
        auto a = lex_->access(i);
        if (!a) return std::nullopt;
        Answer out;
        for (const auto& s : slots_) {
            if (s.kind == Slot::Kind::Cell) out.emplace_back(a->cells[s.index]);
            else out.emplace_back(finalize_opt(fn_, a->annotation));
        }
        return out;
    }
    const AnswerOrder& order() const override { return order_; }
    nlohmann::json stats() const override { return {{"structures", {to_json(lex_->stats())}}}; }

private:
    std::unique_ptr<LexStructure> lex_;
    std::vector<Slot> slots_;
    AnswerOrder order_;
    std::optional<AggFn> fn_;
};

class InteriorEngine final : public Engine {
public:
    InteriorEngine(Semiring s, std::unique_ptr<LexStructure> forward, std::unique_ptr<LexStructure> backward,
                   std::unique_ptr<LexStructure> collapsed, std::vector<Slot> plus_slots, std::vector<Slot> flat_slots,
                   AnswerOrder order, std::optional<AggFn> fn, std::vector<RewriteStep> steps)
        : s_(std::move(s)), forward_(std::move(forward)), backward_(std::move(backward)),
          collapsed_(std::move(collapsed)), plus_slots_(std::move(plus_slots)), flat_slots_(std::move(flat_slots)),
          order_(std::move(order)), fn_(fn) {
        executed_ = std::move(steps);
        if (forward_->count() != backward_->count() || forward_->count() != collapsed_->count())
            throw Error(ErrorCode::Semantic, "internal: forward and backward structures disagree on the count");
    }

    Integer count() const override { return forward_->count(); }
    std::optional<Answer> get(const Integer& i) const override {
        auto f = forward_->access(i);
        if (!f) return std::nullopt;
        const std::vector<Slot>* slots = &plus_slots_;
        if (s_.collapses(f->prefix)) {
            f = collapsed_->access(i);
            slots = &flat_slots_;
        } else if (s_.monotone_direction(f->prefix) == Direction::NonIncreasing) {
            f = backward_->access(i);
        }
        Answer out;
        for (const auto& s : *slots) {
            if (s.kind == Slot::Kind::Cell) out.emplace_back(f->cells[s.index]);
            else out.emplace_back(finalize_opt(fn_, f->annotation));
        }
        return out;
    }
    const AnswerOrder& order() const override { return order_; }
    nlohmann::json stats() const override {
        return {{"structures",
                 {to_json(forward_->stats()), to_json(backward_->stats()), to_json(collapsed_->stats())}}};
    }

private:
    Semiring s_;
    std::unique_ptr<LexStructure> forward_, backward_, collapsed_;
    std::vector<Slot> plus_slots_, flat_slots_;
    AnswerOrder order_;
    std::optional<AggFn> fn_;
};

class CountProductEngine final : public Engine {
public:
    CountProductEngine(CountProduct cp, AnswerOrder order, std::vector<RewriteStep> steps)
        : cp_(std::move(cp)), order_(std::move(order)) {
        executed_ = std::move(steps);
    }
    Integer count() const override { return cp_.count(); }
    std::optional<Answer> get(const Integer& i) const override {
        auto a = cp_.access(i);
        if (!a) return std::nullopt;
        return Answer{Value(a->count), a->x, a->y};
    }
    const AnswerOrder& order() const override { return order_; }
    nlohmann::json stats() const override {
        nlohmann::json buckets = nlohmann::json::array();
        for (const auto& b : cp_.buckets()) buckets.push_back({b.c, b.c2});
        return {{"structures", {{{"buckets", buckets}, {"total", cp_.count().str()}}}}};
    }

private:
    CountProduct cp_;
    AnswerOrder order_;
};

/// Aggregates after the grouping variables: one structure per aggregate,
/// two for Avg, all in the same group order.
class AggregateEngine final : public Engine {
public:
    struct Part {
        AggFn fn;
        std::unique_ptr<LexStructure> main;
        std::unique_ptr<LexStructure> count;  // Avg only
    };

    AggregateEngine(std::vector<Part> parts, std::vector<Slot> slots, AnswerOrder order, std::vector<RewriteStep> steps)
        : parts_(std::move(parts)), slots_(std::move(slots)), order_(std::move(order)) {
        executed_ = std::move(steps);
        for (const auto& p : parts_) {
            if (p.main->count() != parts_[0].main->count() || (p.count && p.count->count() != p.main->count()))
                throw Error(ErrorCode::Semantic, "internal: aggregate structures disagree on the group count");
        }
    }

    Integer count() const override { return parts_.at(0).main->count(); }
    std::optional<Answer> get(const Integer& i) const override {
        std::vector<Value> values;
        std::optional<LexAnswer> first;
        for (const auto& p : parts_) {
            auto a = p.main->access(i);
            if (!a) return std::nullopt;
            if (p.fn == AggFn::Avg) {
                auto c = p.count->access(i);
                const Rational& sum = std::get<Rational>(a->annotation);
                const Integer& n = std::get<Integer>(c->annotation);
                values.push_back(n == 0 ? Rational(0) : Rational(sum / Rational(n)));
            } else {
                values.push_back(finalize(p.fn, a->annotation));
            }
            if (!first) first = std::move(a);
        }
        Answer out;
        std::size_t next = 0;
        for (const auto& s : slots_) {
            if (s.kind == Slot::Kind::Cell) out.emplace_back(first->cells[s.index]);
            else out.emplace_back(values[next++]);
        }
        return out;
    }
    const AnswerOrder& order() const override { return order_; }
    nlohmann::json stats() const override {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& p : parts_) {
            all.push_back(to_json(p.main->stats()));
            if (p.count) all.push_back(to_json(p.count->stats()));
        }
        return {{"structures", all}};
    }

private:
    std::vector<Part> parts_;
    std::vector<Slot> slots_;
    AnswerOrder order_;
};

struct Pipeline {
    Instance instance;
    std::vector<RewriteStep> steps;

    void log(std::string tag, std::string detail) { steps.push_back(step(std::move(tag), std::move(detail), instance.query)); }
};

Pipeline normalized(const Query& q, const AnnotatedDatabase& db) {
    Pipeline p;
    p.instance = make_self_join_free(q, db);
    if (needs_split(q)) p.log("SelfJoinSplit", "private relation copy per atom");
    p.instance.db = full_reduce(p.instance.query, p.instance.db);
    p.log("FullReduce", "semi-join sweeps over a join tree");
    return p;
}

void eliminate(Pipeline& p) {
    if (p.instance.query.is_full()) return;
    p.instance = eliminate_existentials(p.instance);
    p.log("EliminateExistentials", "fold non-free nodes of an ext-free-connex tree");
}

LexOptions lex_options(const PrepareOptions& o, const std::optional<AggFn>& fn) {
    LexOptions l;
    l.bigint = o.bigint;
    if (fn) {
        Semiring out = output_semiring(*fn);
        AggFn f = *fn;
        l.value_compare = [out, f](const Value& a, const Value& b) {
            return out.compare(finalize(f, a), finalize(f, b));
        };
    }
    return l;
}

std::unique_ptr<Engine> build_cq_engine(const Certificate& cert, const Query& q, const AnnotatedDatabase& db,
                                        const PrepareOptions& options, const std::optional<AggFn>& fn,
                                        AnswerOrder order) {
    const Plan& plan = *cert.plan;
    switch (plan.tag) {
    case PlanTag::StarLast: {
        Pipeline p = normalized(plan.constant_star ? without_star(q) : q, db);
        eliminate(p);
        std::vector<int> vars = p.instance.query.head_vars();
        auto lex = build_lex(p.instance.query, p.instance.db, vars, lex_options(options, fn));
        p.log("BuildLex", "layered structure over " + std::to_string(vars.size()) + " variables");
        return std::make_unique<LexEngine>(std::move(lex), slots_for(q, vars), std::move(order), fn, std::move(p.steps));
    }
    case PlanTag::ZBlockMonotone: {
        Pipeline p = normalized(q, db);
        eliminate(p);
        Instance full = p.instance;
        p.instance = extend_with_y(full);
        p.log("ExtendY", "y = product of annotations of atoms outside the x-prefix");
        const Query& plus = p.instance.query;
        std::vector<int> plus_order = plus.head_vars();
        std::size_t prefix = full.query.vars_before_star().size();
        LexOptions lo = lex_options(options, fn);
        lo.prefix_layers = prefix;
        auto forward = build_lex(plus, p.instance.db, plus_order, lo);
        lo.descending_values = true;
        auto backward = build_lex(plus, p.instance.db, plus_order, lo);
        lo.descending_values = false;
        lo.prefix_layers = 0;
        std::vector<int> flat_order = full.query.head_vars();
        auto collapsed = build_lex(full.query, full.db, flat_order, lo);
        p.log("BuildLex", "forward, backward and collapsed structures");
        return std::make_unique<InteriorEngine>(db.semiring, std::move(forward), std::move(backward),
                                                std::move(collapsed), slots_for(q, plus_order),
                                                slots_for(q, flat_order), std::move(order), fn, std::move(p.steps));
    }
    case PlanTag::FullDeannotate: {
        Pipeline p = normalized(q, db);
        if (!p.instance.query.is_full()) {
            p.instance = project_private(p.instance, plan.relation);
            p.log("ProjectPrivate", "sum out variables private to " + plan.relation);
        }
        p.instance = extend_with_annotation_var(p.instance, plan.relation);
        p.log("Deannotate", "annotation of " + plan.relation + " becomes variable y");
        std::vector<int> vars = p.instance.query.head_vars();
        auto lex = build_lex(p.instance.query, p.instance.db, vars, lex_options(options, fn));
        p.log("BuildLex", "layered structure over " + std::to_string(vars.size()) + " variables");
        return std::make_unique<LexEngine>(std::move(lex), slots_for(q, vars), std::move(order), fn, std::move(p.steps));
    }
    case PlanTag::IdempotentLocal: {
        Pipeline p = normalized(q, db);
        auto r = idempotent_eliminate(p.instance, plan.relation);
        p.instance = std::move(r.instance);
        p.log("IdempotentEliminate", "anchored elimination keeps annotations in " + r.annotated);
        p.instance = extend_with_annotation_var(p.instance, r.annotated);
        p.log("Deannotate", "annotation of " + r.annotated + " becomes variable y");
        std::vector<int> vars = p.instance.query.head_vars();
        auto lex = build_lex(p.instance.query, p.instance.db, vars, lex_options(options, fn));
        p.log("BuildLex", "layered structure over " + std::to_string(vars.size()) + " variables");
        return std::make_unique<LexEngine>(std::move(lex), slots_for(q, vars), std::move(order), fn, std::move(p.steps));
    }
    default: break;
    }
    throw Error(ErrorCode::Usage, "plan " + to_string(plan.tag) + " needs the aggregate entry point");
}

}  // namespace

std::unique_ptr<Engine> prepare(const Certificate& cert, const Query& q, const AnnotatedDatabase& db,
                                const PrepareOptions& options) {
    if (!cert.tractable()) throw Error(ErrorCode::Usage, "no engine for a " + to_string(cert.verdict) + " certificate");
    return build_cq_engine(cert, q, db, options, std::nullopt, AnswerOrder(q, db.semiring));
}

std::unique_ptr<Engine> prepare_acq(const Certificate& cert, const Query& acq, const std::vector<RawRelation>& relations,
                                    const std::optional<std::vector<Const>>& domain, const PrepareOptions& options) {
    if (!cert.tractable()) throw Error(ErrorCode::Usage, "no engine for a " + to_string(cert.verdict) + " certificate");
    AnswerOrder order(acq, Semiring::instantiate({}));
    const Plan& plan = *cert.plan;
    std::map<std::string, const Relation*> by_name;
    for (const auto& r : relations) by_name[r.relation.name] = &r.relation;
    auto find = [&](const std::string& name) -> const Relation& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error(ErrorCode::Semantic, "missing relation " + name);
        return *it->second;
    };

    if (plan.tag == PlanTag::CountProduct) {
        auto projected = [&](const Atom& a, int keep) {
            const Relation& src = find(a.relation);
            std::size_t kc = a.vars[0] == keep ? 0 : 1;
            Relation r;
            r.name = a.relation;
            r.arity = 2;
            for (std::size_t i = 0; i < src.rows; ++i) {
                Const row[2] = {src.row(i)[kc], src.row(i)[1 - kc]};
                r.add(row, Value(Integer(1)));
            }
            return r;
        };
        CountProduct cp(projected(acq.body[0], acq.head[1].var), projected(acq.body[1], acq.head[2].var));
        std::vector<RewriteStep> steps{step("CountBuckets", "occurrence counts per x and per y", acq)};
        return std::make_unique<CountProductEngine>(std::move(cp), std::move(order), std::move(steps));
    }

    if (plan.tag == PlanTag::StarLast || plan.tag == PlanTag::MultiAggregateStarLast) {
        std::size_t star = *acq.star_position();
        bool last = true;
        for (std::size_t i = star; i < acq.head.size(); ++i)
            if (acq.head[i].kind != HeadEntry::Kind::Agg) last = false;
        if (last) {
            std::vector<AggregateEngine::Part> parts;
            std::vector<RewriteStep> steps;
            std::vector<int> vars = acq.head_vars();
            auto build = [&](std::size_t which, std::optional<AggFn> as) {
                Translation t = translate_acq(acq, which, domain, as);
                AnnotatedDatabase db = annotate_with_rule(t, relations);
                Pipeline p = normalized(t.query, db);
                eliminate(p);
                auto lex = build_lex(p.instance.query, p.instance.db, vars, lex_options(options, std::nullopt));
                p.log("BuildLex", "structure for aggregate " + std::to_string(which + 1));
                steps.insert(steps.end(), p.steps.begin(), p.steps.end());
                return lex;
            };
            std::size_t which = 0;
            for (const auto& e : acq.head) {
                if (e.kind != HeadEntry::Kind::Agg) continue;
                AggregateEngine::Part part{e.fn, nullptr, nullptr};
                if (e.fn == AggFn::Avg) {
                    part.main = build(which, AggFn::Sum);
                    part.count = build(which, AggFn::Count);
                } else {
                    part.main = build(which, std::nullopt);
                }
                parts.push_back(std::move(part));
                ++which;
            }
            return std::make_unique<AggregateEngine>(std::move(parts), slots_for(acq, vars), std::move(order),
                                                     std::move(steps));
        }
    }

    Translation t = translate_acq(acq, 0, domain);
    AnnotatedDatabase db = annotate_with_rule(t, relations);
    return build_cq_engine(cert, t.query, db, options, t.rule.fn, std::move(order));
}

}  // namespace dacq
