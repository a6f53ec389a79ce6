// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "dacq/access.hpp"
#include "dacq/cli.hpp"
#include "dacq/error.hpp"
#include "dacq/hypergraph.hpp"
#include "dacq/oracle.hpp"
#include "dacq/planner.hpp"
#include "dacq/rewrite.hpp"
#include "dacq/translate.hpp"
#include "gen.hpp"

#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace dacq;
using namespace dacq::testing;

namespace {

// Pinned thresholds.
constexpr int kInstancesPerClass = 500;
constexpr int kMaxTriesPerClass = 400000;
constexpr int kAllowedMismatches = 0;
constexpr int kInvariantChecks = 1000;
constexpr double kMaxDoublingRatio = 2.6;
constexpr double kMaxAccessGrowth = 20.0;
constexpr int kBenchReps = 5;

int failures = 0;

void report(int n, bool ok, const std::string& what, const std::string& detail) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << what << " (" << detail << ")" << std::endl;
}

std::vector<RawRelation> goal_tables() {
    return {make_relation("Teams", 2, {{"1", "5"}, {"2", "5"}, {"3", "6"}, {"4", "7"}, {"5", "8"}}),
            make_relation("Goals", 3, {{"1", "1", "31"}, {"1", "3", "50"}, {"1", "3", "75"}, {"2", "4", "90"}, {"2", "4", "9"}}),
            make_relation("Replays", 2, {{"1", "1"}, {"1", "31"}, {"1", "50"}, {"2", "5"}, {"1", "90"}})};
}

std::vector<std::string> engine_lines(const Engine& e) {
    std::vector<std::string> out;
    for (Integer i = 1; i <= e.count(); ++i) out.push_back(e.order().format(*e.get(i)));
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
    return s;
}

// ---------------------------------------------------------------------------

struct ClassTally {
    int checked = 0;
    int mismatches = 0;
    int tries = 0;
    std::string first_bad;
};

void tally(ClassTally& t, const std::string& text, const std::function<std::string()>& check) {
    std::string d;
    try {
        d = check();
    } catch (const std::exception& e) {
        d = std::string("error: ") + e.what();
    }
    ++t.checked;
    if (!d.empty()) {
        ++t.mismatches;
        if (t.first_bad.empty()) t.first_bad = text + " " + d;
    }
}

void criterion_oracle_equivalence() {
    GenConfig cfg;  // 4 atoms, arity 4, 25 facts, domain 8
    std::map<std::string, ClassTally> classes;
    Rng rng(20240601);

    auto star_class = [&](const std::string& name, PlanTag tag, std::vector<std::optional<SemiringKind>> kinds,
                          std::optional<ProfileMode> mode) {
        ClassTally& t = classes[name];
        while (t.checked < kInstancesPerClass && t.tries < kMaxTriesPerClass) {
            auto c = random_star_case(rng, cfg, kinds[t.tries % kinds.size()], mode);
            ++t.tries;
            Certificate cert = classify(c.query, c.db.semiring, profile_of(c.db));
            if (!cert.tractable() || cert.plan->tag != tag) continue;
            tally(t, c.text, [&] { return diff_with_oracle(*prepare(cert, c.query, c.db), brute_force(c.query, c.db)); });
        }
    };
    star_class("StarLast", PlanTag::StarLast, {std::nullopt}, std::nullopt);
    star_class("ZBlockMonotone", PlanTag::ZBlockMonotone, {std::nullopt}, std::nullopt);
    star_class("FullDeannotate", PlanTag::FullDeannotate, {std::nullopt}, ProfileMode::Local);
    star_class("IdempotentLocal", PlanTag::IdempotentLocal,
               {SemiringKind{Kind::MinTropical, {}}, SemiringKind{Kind::MaxTropical, {}},
                SemiringKind{Kind::Set, set_domain()}},
               ProfileMode::Local);

    auto acq_oracle = [](const AcqCase& c, const Certificate& cert) {
        auto e = prepare_acq(cert, c.query, c.raws, c.domain);
        AnnotatedDatabase db = annotate_database(c.raws, Semiring::instantiate({}));
        auto o = cert.plan->tag == PlanTag::CountProduct ? brute_force_count_product(c.query, db) : brute_force(c.query, db);
        return diff_with_oracle(*e, o);
    };
    {
        ClassTally& t = classes["CountProduct"];
        while (t.checked < kInstancesPerClass && t.tries < kMaxTriesPerClass) {
            auto c = random_count_product_case(rng, cfg);
            ++t.tries;
            Certificate cert = classify_acq(c.query, false);
            if (!cert.tractable() || cert.plan->tag != PlanTag::CountProduct) continue;
            tally(t, c.text, [&] { return acq_oracle(c, cert); });
        }
    }
    {
        ClassTally& t = classes["Avg"];
        while (t.checked < kInstancesPerClass && t.tries < kMaxTriesPerClass) {
            auto c = random_acq_case(rng, cfg, 1 + t.tries % 2, t.tries % 3 != 0);
            ++t.tries;
            bool avg = std::any_of(c.query.head.begin(), c.query.head.end(),
                                   [](const HeadEntry& h) { return h.kind == HeadEntry::Kind::Agg && h.fn == AggFn::Avg; });
            if (!avg) continue;
            Certificate cert = classify_acq(c.query, c.domain.has_value());
            if (!cert.tractable()) continue;
            tally(t, c.text, [&] { return acq_oracle(c, cert); });
        }
    }
    {
        ClassTally& t = classes["MultiAggregate"];
        while (t.checked < kInstancesPerClass && t.tries < kMaxTriesPerClass) {
            auto c = random_acq_case(rng, cfg, 2 + t.tries % 2, true);
            ++t.tries;
            Certificate cert = classify_acq(c.query, c.domain.has_value());
            if (!cert.tractable() || cert.plan->tag != PlanTag::MultiAggregateStarLast) continue;
            tally(t, c.text, [&] { return acq_oracle(c, cert); });
        }
    }

    bool ok = true;
    std::string detail;
    for (const auto& [name, t] : classes) {
        ok = ok && t.checked >= kInstancesPerClass && t.mismatches <= kAllowedMismatches;
        detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(t.checked - t.mismatches) + "/" +
                  std::to_string(t.checked);
        if (!t.first_bad.empty()) detail += " [" + t.first_bad + "]";
    }
    report(1, ok, "oracle equivalence on random instances", detail);
}

// ---------------------------------------------------------------------------

void criterion_goal_sums() {
    const std::vector<std::string> want{"5,31", "6,50"};
    Query acq = parse_query("Q(c, Sum(t)) :- Teams(p,c), Goals(g,p,t), Replays(g,t).");
    std::vector<std::string> via_acq, via_star, via_oracle;
    try {
        via_acq = engine_lines(*prepare_acq(classify_acq(acq, false), acq, goal_tables(), std::nullopt));

        auto t = translate_acq(acq);
        auto db = annotate_with_rule(t, goal_tables());
        Certificate cert = classify(t.query, db.semiring, profile_of(db));
        via_star = engine_lines(*prepare(cert, t.query, db));

        AnnotatedDatabase plain = annotate_database(goal_tables(), Semiring::instantiate({}));
        auto o = brute_force(acq, plain);
        AnswerOrder order(acq, plain.semiring);
        for (const auto& a : o.answers) via_oracle.push_back(order.format(a));
    } catch (const std::exception& e) {
        report(2, false, "goal sums by team", e.what());
        return;
    }
    report(2, via_acq == want && via_star == want && via_oracle == want, "goal sums by team",
           "acq [" + join(via_acq) + "] cq* [" + join(via_star) + "] oracle [" + join(via_oracle) + "]");
}

// ---------------------------------------------------------------------------

void criterion_count_product() {
    auto r = make_relation("R", 2, {{"a", "1"}, {"b", "1"}, {"b", "2"}, {"c", "1"}, {"c", "2"}, {"c", "3"}});
    auto s = make_relation("S", 2, {{"a'", "1"}, {"b'", "1"}, {"c'", "1"}, {"c'", "2"}, {"d'", "1"}, {"d'", "2"}});
    CountProduct cp(r.relation, s.relation);
    std::vector<std::uint64_t> products;
    for (const auto& b : cp.buckets()) products.push_back(b.c * b.c2);
    auto first = cp.access(1), last = cp.access(12);
    auto text = [](const std::optional<CountProduct::Answer>& a) {
        return a ? a->count.str() + "," + const_text(a->x) + "," + const_text(a->y) : std::string("none");
    };
    std::string p;
    for (auto v : products) p += (p.empty() ? "" : ",") + std::to_string(v);
    bool ok = products == std::vector<std::uint64_t>{1, 2, 2, 3, 4, 6} && cp.count() == 12 &&
              text(first) == "1,a,a'" && text(last) == "6,c,d'" && !cp.access(13);
    report(3, ok, "count-product buckets",
           "products " + p + " total " + cp.count().str() + " access(1)=" + text(first) + " access(12)=" + text(last));
}

// ---------------------------------------------------------------------------

void criterion_decision_table() {
    struct Row {
        std::string name;
        std::string text;
        bool acq;
        Kind kind;
        Profile profile;
        bool domain;
        Verdict want;
    };
    Profile generic{false, {}};
    Profile s_local{false, std::string("S")};
    std::vector<Row> rows = {
        {"Q1", "Q(c,o,p,t) :- Teams(p,c), Sponsors(o,c), Goals(g,p,t).", false, Kind::Counting, {}, false,
         Verdict::Tractable},
        {"Eq1 (*,x,y)", "Q(*,x,y) :- R(x), S(y).", false, Kind::Counting, generic, false, Verdict::Intractable},
        {"Eq1 (x,*,y)", "Q(x,*,y) :- R(x), S(y).", false, Kind::Counting, generic, false, Verdict::Tractable},
        {"Eq2", "Q(w,x,*,y,z) :- R(w,x), S(x,y,z), T(y,z).", false, Kind::Numeric, generic, false, Verdict::Tractable},
        {"Eq3 (*,x2,x3,x1)", "Q(*,x2,x3,x1) :- R(x1,x3), S(x2,x3).", false, Kind::Numeric, s_local, false,
         Verdict::Tractable},
        {"Eq3 (*,x1,x3,x2)", "Q(*,x1,x3,x2) :- R(x1,x3), S(x2,x3).", false, Kind::Numeric, s_local, false,
         Verdict::Intractable},
        {"Eq4", "Q(Sum(w),x3,x1,x2) :- R(x1,x3), S(x2,x3), T(x3,w).", true, {}, {}, false, Verdict::Tractable},
        {"Eq6", "Q(Max(w2),x1,x3,x2) :- R(x1,x3,w3), S(x2,x3), T(x3,w1), U(w1,w2).", true, {}, {}, false,
         Verdict::Tractable},
        {"Eq7", "Q(Max(w2),x1,x3,x2) :- U(x1,x3), V(x2,x3), R(x3,w1,w2).", true, {}, {}, false, Verdict::Tractable},
        {"CountD", "Q(x,CountD(y)) :- R(x,w), S(y,w).", true, {}, {}, false, Verdict::Intractable},
        {"CountD+domain", "Q(x,CountD(y)) :- R(x,w), S(y,w).", true, {}, {}, true, Verdict::Tractable},
        {"count product", "Q(Count(),x,y) :- R(x,w), S(y,z).", true, {}, {}, false, Verdict::Tractable},
    };
    int right = 0;
    std::string detail;
    for (const auto& r : rows) {
        Query q = parse_query(r.text);
        Certificate c = r.acq ? classify_acq(q, r.domain) : classify(q, Semiring::instantiate({r.kind, {}}), r.profile);
        bool ok = c.verdict == r.want;
        right += ok;
        detail += (detail.empty() ? "" : "; ") + r.name + " " + to_string(c.verdict) + " " + c.theorem + (ok ? "" : " WRONG");
    }
    report(4, right == static_cast<int>(rows.size()), "decision table",
           std::to_string(right) + "/" + std::to_string(rows.size()) + " rows: " + detail);
}

// ---------------------------------------------------------------------------

void criterion_scaling() {
    cli::BenchConfig cfg;
    cfg.log_sizes = {14, 15, 16, 17, 18};
    cfg.reps = kBenchReps;
    nlohmann::json j = cli::run_bench(cfg);
    double ratio = j["doubling_ratio_median"].get<double>();
    const auto& access = j["access_us_median"];
    double growth = access.back().get<double>() / access.front().get<double>();
    std::ostringstream d;
    d << "build ms " << j["build_ms_median"].dump() << " doubling ratios " << j["doubling_ratios"].dump()
      << " median " << ratio << " (<= " << kMaxDoublingRatio << "), access us " << access.dump() << " growth "
      << growth << " (<= " << kMaxAccessGrowth << ")";
    report(5, ratio <= kMaxDoublingRatio && growth <= kMaxAccessGrowth, "loglinear build, logarithmic access", d.str());
}

// ---------------------------------------------------------------------------

std::vector<SemiringKind> all_kinds() {
    return {{Kind::Counting, {}},    {Kind::Numeric, {}}, {Kind::MinTropical, {}},
            {Kind::MaxTropical, {}}, {Kind::Set, set_domain()}, {Kind::Avg, {}}};
}

int semiring_axiom_checks(Rng& rng, std::string& bad) {
    int checks = 0;
    for (const auto& k : all_kinds()) {
        auto s = Semiring::instantiate(k);
        auto sample = [&] {
            if (std::bernoulli_distribution(0.1)(rng)) return std::bernoulli_distribution(0.5)(rng) ? s.zero() : s.one();
            return s.parse(random_literal(rng, k));
        };
        for (int i = 0; i < kInvariantChecks; ++i) {
            Value a = sample(), b = sample(), c = sample();
            bool ok = s.plus(s.plus(a, b), c) == s.plus(a, s.plus(b, c)) &&
                      s.times(s.times(a, b), c) == s.times(a, s.times(b, c)) && s.plus(a, b) == s.plus(b, a) &&
                      s.times(a, b) == s.times(b, a) &&
                      s.times(a, s.plus(b, c)) == s.plus(s.times(a, b), s.times(a, c)) && s.plus(a, s.zero()) == a &&
                      s.times(a, s.one()) == a && s.times(a, s.zero()) == s.zero() &&
                      (!s.plus_idempotent() || s.plus(a, a) == a) && s.compare(a, b) == -s.compare(b, a);
            if (!ok && bad.empty()) bad = s.name() + " " + s.format(a) + " " + s.format(b) + " " + s.format(c);
            ++checks;
        }
    }
    return checks;
}

bool holders_connected(const JoinTree& t) {
    auto adj = t.adjacency();
    VarSet all = 0;
    for (const auto& n : t.nodes) all |= n.vars;
    for (int v = 0; v < kMaxVars; ++v) {
        if (!has(all, v)) continue;
        std::vector<int> holders;
        for (std::size_t i = 0; i < t.nodes.size(); ++i)
            if (has(t.nodes[i].vars, v)) holders.push_back(static_cast<int>(i));
        std::vector<bool> seen(t.nodes.size(), false);
        std::vector<int> stack{holders[0]};
        seen[holders[0]] = true;
        std::size_t reached = 0;
        while (!stack.empty()) {
            int n = stack.back();
            stack.pop_back();
            ++reached;
            for (int m : adj[n])
                if (!seen[m] && has(t.nodes[m].vars, v)) {
                    seen[m] = true;
                    stack.push_back(m);
                }
        }
        if (reached != holders.size()) return false;
    }
    return true;
}

void criterion_invariants() {
    Rng rng(777);
    GenConfig cfg;
    std::string bad;
    int axioms = semiring_axiom_checks(rng, bad);
    bool axioms_ok = bad.empty();

    int rip = 0;
    bool rip_ok = true;
    for (int i = 0; rip < kInvariantChecks && i < 100 * kInvariantChecks; ++i) {
        Body b = random_body(rng, cfg);
        std::string head;
        for (const auto& v : b.var_names) head += (head.empty() ? "" : ",") + v;
        Query q = parse_query("Q(" + head + ") :- " + body_text(b) + ".");
        auto tree = gyo_acyclic(hypergraph_of(q));
        if (auto* t = std::get_if<JoinTree>(&tree)) {
            rip_ok = rip_ok && holders_connected(*t) && running_intersection(*t) && t->edges.size() + 1 == t->nodes.size();
            ++rip;
        }
    }

    int prefix = 0;
    bool prefix_ok = true;
    for (int i = 0; prefix < kInvariantChecks && i < 100 * kInvariantChecks; ++i) {
        auto c = random_star_case(rng, cfg);
        if (!c.query.is_full() || !is_acyclic(hypergraph_of(c.query))) continue;
        Instance in = make_self_join_free(c.query, c.db);
        auto order = in.query.head_vars();
        if (find_disruptive_trio(hypergraph_of(in.query).edges, order)) continue;
        auto lex = build_lex(in.query, full_reduce(in.query, in.db), order);
        bool ok = lex->check_invariants();
        std::optional<LexAnswer> prev;
        for (Integer k = 1; ok && k <= lex->count(); ++k) {
            auto a = lex->access(k);
            ok = a.has_value() && (!prev || std::lexicographical_compare(prev->cells.begin(), prev->cells.end(),
                                                                         a->cells.begin(), a->cells.end(), const_less));
            prev = a;
        }
        ok = ok && !lex->access(lex->count() + 1);
        prefix_ok = prefix_ok && ok;
        ++prefix;
    }

    int locality = 0;
    bool locality_ok = true;
    GenConfig local_cfg = cfg;
    local_cfg.self_join = 0.0;
    std::vector<SemiringKind> idem = {{Kind::MinTropical, {}}, {Kind::MaxTropical, {}}, {Kind::Set, set_domain()}};
    for (int i = 0; locality < kInvariantChecks && i < 100 * kInvariantChecks; ++i) {
        auto c = random_star_case(rng, local_cfg, idem[i % 3], ProfileMode::Local);
        if (!c.query.has_star() || !is_free_connex(c.query)) continue;
        std::string relation = c.db.annotated_relation.value_or(c.query.body[0].relation);
        auto r = idempotent_eliminate(make_self_join_free(c.query, c.db), relation);
        bool ok = r.instance.query.is_full() && r.instance.query.atom_of(r.annotated) >= 0;
        for (const auto& [name, rel] : r.instance.db.relations)
            if (name != r.annotated)
                for (const auto& v : rel.annotations) ok = ok && v == r.instance.db.semiring.one();
        auto want = brute_force(c.query, c.db), got = brute_force(r.instance.query, r.instance.db);
        ok = ok && want.answers == got.answers && want.values == got.values;
        locality_ok = locality_ok && ok;
        ++locality;
    }

    auto part = [](const std::string& name, int n, bool ok) {
        return name + " " + std::to_string(n) + (ok ? " ok" : " VIOLATED");
    };
    report(6,
           axioms_ok && rip_ok && prefix_ok && locality_ok && axioms >= kInvariantChecks && rip >= kInvariantChecks &&
               prefix >= kInvariantChecks && locality >= kInvariantChecks,
           "invariant suites",
           part("semiring axioms", axioms, axioms_ok) + ", " + part("running intersection", rip, rip_ok) + ", " +
               part("prefix sums and order", prefix, prefix_ok) + ", " +
               part("idempotent locality", locality, locality_ok) + (bad.empty() ? "" : " [" + bad + "]"));
}

// ---------------------------------------------------------------------------

void criterion_overflow() {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "dacq_acceptance_overflow";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string rels, head, body, rows;
    for (int i = 0; i < 300; ++i) rows += std::to_string(i) + "\n";
    for (int r = 0; r < 8; ++r) {
        std::string name = "R" + std::to_string(r);
        std::ofstream(dir / (name + ".csv")) << rows;
        rels += (r ? ", " : "") + std::string("{name = \"") + name + "\", path = \"" + name + ".csv\", arity = 1}";
        head += (r ? "," : "") + std::string("x") + std::to_string(r);
        body += (r ? ", " : "") + name + "(x" + std::to_string(r) + ")";
    }
    std::ofstream(dir / "q.dl") << "Q(" << head << ") :- " << body << ".";
    std::ofstream(dir / "ws.toml") << "relations = [" << rels << "]\nquery = \"q.dl\"\nsemiring = \"counting\"\n";
    std::string manifest = (dir / "ws.toml").string();

    auto run = [&](std::vector<std::string> args, std::string& out, std::string& err) {
        args.insert(args.begin(), "dacq");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream o, e;
        int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
        out = o.str();
        err = e.str();
        return code;
    };
    std::string out1, err1, out2, err2;
    int plain = run({"get", manifest, "--quantile", "1.0"}, out1, err1);
    int big = run({"get", manifest, "--quantile", "1.0", "--bigint"}, out2, err2);
    bool overflow = plain != 0 && err1.find("WeightOverflow") != std::string::npos;
    bool last_ok = big == 0 && out2 == "299,299,299,299,299,299,299,299\n";

    Integer expected = 1;
    for (int r = 0; r < 8; ++r) expected *= 300;
    Query q = parse_query("Q(" + head + ") :- " + body + ".");
    std::vector<RawRelation> raws;
    std::vector<std::vector<std::string>> rv;
    for (int i = 0; i < 300; ++i) rv.push_back({std::to_string(i)});
    for (int r = 0; r < 8; ++r) raws.push_back(make_relation("R" + std::to_string(r), 1, rv));
    LexOptions opts;
    opts.bigint = true;
    Integer count = build_lex(q, annotate_database(raws, Semiring::instantiate({})), q.head_vars(), opts)->count();
    fs::remove_all(dir);

    report(7, overflow && last_ok && count == expected, "count overflow handling",
           "default exit " + std::to_string(plain) + (overflow ? " with WeightOverflow" : " without WeightOverflow") +
               ", --bigint exit " + std::to_string(big) + " last answer " + (out2.empty() ? "-" : out2.substr(0, out2.size() - 1)) +
               ", count " + count.str() + " (expected 300^8 = " + expected.str() + ")");
}

}  // namespace

int main() {
    criterion_oracle_equivalence();
    criterion_goal_sums();
    criterion_count_product();
    criterion_decision_table();
    criterion_scaling();
    criterion_invariants();
    criterion_overflow();
    return failures == 0 ? 0 : 1;
}
