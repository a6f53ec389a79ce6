#include "dacq/access.hpp"
#include "dacq/error.hpp"
#include "dacq/oracle.hpp"
#include "dacq/rewrite.hpp"
#include "gen.hpp"

#include <gtest/gtest.h>

using namespace dacq;
using dacq::testing::Rng;

namespace {

using Rows = std::vector<std::vector<std::string>>;

AnnotatedDatabase make_db(const Semiring& s, const std::vector<std::pair<std::string, Rows>>& rels,
                          const std::map<std::string, std::vector<std::string>>& annotations = {}) {
    std::vector<RawRelation> raws;
    for (const auto& [name, rows] : rels) {
        std::size_t arity = rows.empty() ? 1 : rows[0].size();
        RawRelation r = make_relation(name, arity, rows);
        if (auto it = annotations.find(name); it != annotations.end()) r.annotation_column = it->second;
        raws.push_back(std::move(r));
    }
    return annotate_database(raws, s);
}

std::vector<std::string> facts(const Relation& r, const Semiring& s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < r.rows; ++i) {
        std::string f = "(";
        for (std::size_t c = 0; c < r.arity; ++c) f += (c ? "," : "") + const_text(r.row(i)[c]);
        out.push_back(f + ")->" + s.format(r.annotations[i]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> oracle_lines(const Query& q, const AnnotatedDatabase& db) {
    auto r = brute_force(q, db);
    AnswerOrder order(q, db.semiring);
    std::vector<std::string> out;
    for (const auto& a : r.answers) out.push_back(order.format(a));
    return out;
}

Instance normalized(const Query& q, const AnnotatedDatabase& db) {
    Instance in = make_self_join_free(q, db);
    in.db = full_reduce(in.query, in.db);
    return in;
}

}  // namespace

TEST(Rewrite, SelfJoinSplit) {
    auto s = Semiring::instantiate({Kind::Counting, {}});
    auto db = make_db(s, {{"R", {{"1", "2"}, {"2", "3"}}}});
    Instance in = make_self_join_free(parse_query("Q(x,z) :- R(x,y), R(y,z)."), db);
    EXPECT_EQ(to_string(in.query), "Q(x, z) :- R#1(x, y), R#2(y, z).");
    EXPECT_TRUE(in.query.self_join_free());
    EXPECT_EQ(in.db.total_facts(), 4u);
    EXPECT_EQ(facts(in.db.at("R#1"), s), facts(db.at("R"), s));
    EXPECT_EQ(facts(in.db.at("R#2"), s), facts(db.at("R"), s));

    Query free = parse_query("Q(x,z) :- R(x,y), S(y,z).");
    auto db2 = make_db(s, {{"R", {{"1", "2"}}}, {"S", {{"2", "3"}}}});
    Instance same = make_self_join_free(free, db2);
    EXPECT_EQ(to_string(same.query), to_string(free));
    EXPECT_EQ(same.db.total_facts(), 2u);
}

TEST(Rewrite, RepeatedVariableFolds) {
    auto s = Semiring::instantiate({Kind::Counting, {}});
    auto db = make_db(s, {{"R", {{"1", "1"}, {"1", "2"}}}});
    Instance in = make_self_join_free(parse_query("Q(x) :- R(x,x)."), db);
    EXPECT_EQ(to_string(in.query), "Q(x) :- R(x).");
    EXPECT_EQ(facts(in.db.at("R"), s), (std::vector<std::string>{"(1)->1"}));
}

TEST(Rewrite, FullReduce) {
    auto s = Semiring::instantiate({Kind::Counting, {}});
    Query q = parse_query("Q(x,y,z) :- R(x,y), S(y,z).");
    auto db = make_db(s, {{"R", {{"1", "2"}}}, {"S", {{"2", "3"}}}});
    EXPECT_EQ(full_reduce(q, db).total_facts(), 2u);
    auto db2 = make_db(s, {{"R", {{"1", "2"}, {"1", "9"}}}, {"S", {{"2", "3"}}}});
    auto reduced = full_reduce(q, db2);
    EXPECT_EQ(facts(reduced.at("R"), s), (std::vector<std::string>{"(1,2)->1"}));
    auto db3 = make_db(s, {{"R", {{"1", "2"}}}, {"S", {}}});
    EXPECT_EQ(full_reduce(q, db3).total_facts(), 0u);
}

TEST(Rewrite, EliminateCounting) {
    auto s = Semiring::instantiate({Kind::Counting, {}});
    Query q = parse_query("Q(x,*) :- R(x,y), S(y,z).");
    auto db = make_db(s, {{"R", {{"1", "2"}, {"1", "3"}, {"2", "3"}}}, {"S", {{"2", "7"}, {"3", "7"}, {"3", "8"}}}});
    Instance out = eliminate_existentials(normalized(q, db));
    EXPECT_TRUE(out.query.is_full());
    ASSERT_EQ(out.query.body.size(), 1u);
    EXPECT_EQ(facts(out.db.at(out.query.body[0].relation), s), (std::vector<std::string>{"(1)->3", "(2)->2"}));
    EXPECT_EQ(to_string(eliminated_shape(q)), to_string(out.query));
}

TEST(Rewrite, EliminateMaxTropical) {
    auto s = Semiring::instantiate({Kind::MaxTropical, {}});
    auto db = make_db(s, {{"R", {{"1", "5"}, {"1", "9"}}}}, {{"R", {"5", "9"}}});
    Instance out = eliminate_existentials(normalized(parse_query("Q(x,*) :- R(x,w)."), db));
    ASSERT_EQ(out.query.body.size(), 1u);
    EXPECT_EQ(facts(out.db.at(out.query.body[0].relation), s), (std::vector<std::string>{"(1)->9"}));
}

TEST(Rewrite, EliminateFullIsIdentity) {
    auto s = Semiring::instantiate({Kind::Numeric, {}});
    Query q = parse_query("Q(x,y,*) :- R(x,y).");
    auto db = make_db(s, {{"R", {{"1", "2"}, {"3", "4"}}}}, {{"R", {"-2", "1/2"}}});
    Instance out = eliminate_existentials(normalized(q, db));
    EXPECT_EQ(to_string(out.query), to_string(q));
    EXPECT_EQ(facts(out.db.at("R"), s), facts(db.at("R"), s));
}

TEST(Rewrite, EliminateRejectsNonFreeConnex) {
    auto s = Semiring::instantiate({Kind::Counting, {}});
    auto db = make_db(s, {{"R", {{"1", "2"}}}, {"S", {{"2", "3"}}}});
    try {
        eliminate_existentials(normalized(parse_query("Q(x,z,*) :- R(x,y), S(y,z)."), db));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFreeConnex);
    }
}

TEST(Rewrite, IdempotentEliminateMaxTropical) {
    auto s = Semiring::instantiate({Kind::MaxTropical, {}});
    Query q = parse_query("Q(x1,x2,x3,*) :- U(x1,x3), V(x2,x3), R(x3,w1,w2).");
    auto db = make_db(s, {{"U", {{"1", "5"}}}, {"V", {{"2", "5"}}}, {"R", {{"5", "1", "1"}, {"5", "2", "2"}}}},
                      {{"R", {"4", "9"}}});
    auto r = idempotent_eliminate(make_self_join_free(q, db), "R");
    EXPECT_TRUE(r.instance.query.is_full());
    int carrier = r.instance.query.atom_of(r.annotated);
    ASSERT_GE(carrier, 0);
    EXPECT_EQ(r.instance.query.atom_vars(carrier), bit(q.var_id("x3")));
    EXPECT_EQ(facts(r.instance.db.at(r.annotated), s), (std::vector<std::string>{"(5)->9"}));
    EXPECT_EQ(r.instance.db.annotated_relation, std::optional<std::string>(r.annotated));
    EXPECT_EQ(oracle_lines(r.instance.query, r.instance.db), oracle_lines(q, db));
}

TEST(Rewrite, IdempotentEliminateGuards) {
    auto mx = Semiring::instantiate({Kind::MaxTropical, {}});
    Query full = parse_query("Q(x,*) :- R(x).");
    auto db = make_db(mx, {{"R", {{"1"}}}}, {{"R", {"3"}}});
    auto r = idempotent_eliminate(make_self_join_free(full, db), "R");
    EXPECT_EQ(r.annotated, "R");
    EXPECT_EQ(to_string(r.instance.query), to_string(full));

    auto c = Semiring::instantiate({Kind::Counting, {}});
    auto dbc = make_db(c, {{"R", {{"1"}}}});
    try {
        idempotent_eliminate(make_self_join_free(full, dbc), "R");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotIdempotent);
    }
    auto two = make_db(mx, {{"R", {{"1", "2"}}}, {"S", {{"2"}}}}, {{"R", {"3"}}, {"S", {"4"}}});
    try {
        idempotent_eliminate(make_self_join_free(parse_query("Q(x,*) :- R(x,y), S(y)."), two), "R");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotLocallyAnnotated);
    }
}

TEST(Rewrite, DeannotateExamples) {
    Query q = parse_query("Q(*,x2,x3,x1) :- R(x1,x3), S(x2,x3).");
    Query a = deannotate(q, "S");
    EXPECT_EQ(to_string(a), "Q(y__, x2, x3, x1) :- R(x1, x3), S(x2, x3, y__).");
    EXPECT_FALSE(find_disruptive_trio(a));

    Query b = deannotate(parse_query("Q(*,x1,x3,x2) :- R(x1,x3), S(x2,x3)."), "S");
    EXPECT_TRUE(find_disruptive_trio(b));

    EXPECT_EQ(to_string(deannotate(parse_query("Q(x,*) :- R(x)."), "R")), "Q(x, y__) :- R(x, y__).");
}

TEST(Rewrite, ExtendWithAnnotationVar) {
    auto s = Semiring::instantiate({Kind::Numeric, {}});
    Query q = parse_query("Q(*,x) :- R(x).");
    auto db = make_db(s, {{"R", {{"1"}, {"2"}}}}, {{"R", {"5", "3"}}});
    Instance e = extend_with_annotation_var(make_self_join_free(q, db), "R");
    EXPECT_EQ(to_string(e.query), "Q(y__, x) :- R(x, y__).");
    auto lex = build_lex(e.query, e.db, e.query.head_vars());
    ASSERT_EQ(lex->count(), 2);
    auto first = lex->access(1);
    ASSERT_TRUE(first);
    EXPECT_EQ(s.format(e.db.value_pool.at(first->cells[0])), "3");
    EXPECT_EQ(const_text(first->cells[1]), "2");

    Query q2 = parse_query("Q(*,x,y) :- R(x), S(x,y).");
    auto db2 = make_db(s, {{"R", {{"1"}}}, {"S", {{"1", "7"}, {"4", "8"}}}}, {{"R", {"6"}}});
    Instance e2 = extend_with_annotation_var(make_self_join_free(q2, db2), "R");
    EXPECT_EQ(e2.db.at("S").rows, 1u);
    EXPECT_EQ(e2.db.at("S").arity, 3u);

    auto ones = make_db(s, {{"R", {{"1"}, {"2"}}}});
    Instance e3 = extend_with_annotation_var(make_self_join_free(q, ones), "R");
    const Relation& r = e3.db.at("R");
    for (std::size_t i = 0; i < r.rows; ++i) EXPECT_EQ(e3.db.value_pool.at(r.row(i)[1]), s.one());
}

TEST(Rewrite, ExtendWithY) {
    Query q = parse_query("Q(w,x,*,y,z) :- R(w,x), S(x,y,z), T(y,z).");
    EXPECT_TRUE(z_block_condition(q));
    EXPECT_EQ(to_string(extend_with_y_shape(q)), "Q(w, x, y__, y, z, *) :- R(w, x), S(x, y, z, y__), T(y, z).");
    Query bad = parse_query("Q(*,x,y) :- R(x), S(y).");
    EXPECT_FALSE(z_block_condition(bad));
    try {
        extend_with_y_shape(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZBlockViolation);
    }
    Query ok = parse_query("Q(x,*,y) :- R(x), S(y).");
    EXPECT_EQ(to_string(extend_with_y_shape(ok)), "Q(x, y__, y, *) :- R(x), S(y, y__).");
}

TEST(Rewrite, EliminationPreservesAnswers) {
    Rng rng(61);
    dacq::testing::GenConfig cfg;
    cfg.max_arity = 3;
    cfg.max_facts = 20;
    int checked = 0;
    for (int i = 0; i < 6000 && checked < 1000; ++i) {
        auto c = dacq::testing::random_star_case(rng, cfg);
        if (!c.query.has_star() || !is_free_connex(c.query)) continue;
        Instance out = eliminate_existentials(normalized(c.query, c.db));
        ASSERT_TRUE(out.query.is_full()) << c.text;
        ASSERT_EQ(oracle_lines(out.query, out.db), oracle_lines(c.query, c.db)) << c.text << " " << c.db.semiring.name();
        ++checked;
    }
    EXPECT_GE(checked, 1000);
}

TEST(Rewrite, IdempotentEliminationKeepsLocality) {
    Rng rng(67);
    dacq::testing::GenConfig cfg;
    cfg.max_arity = 3;
    cfg.max_facts = 20;
    cfg.self_join = 0.0;
    std::vector<SemiringKind> kinds = {
        {Kind::MinTropical, {}}, {Kind::MaxTropical, {}}, {Kind::Set, dacq::testing::set_domain()}};
    int checked = 0;
    for (int i = 0; i < 8000 && checked < 1000; ++i) {
        auto c = dacq::testing::random_star_case(rng, cfg, kinds[i % 3], dacq::testing::ProfileMode::Local);
        if (!c.query.has_star() || !is_free_connex(c.query)) continue;
        std::string relation = c.db.annotated_relation.value_or(c.query.body[0].relation);
        auto r = idempotent_eliminate(make_self_join_free(c.query, c.db), relation);
        const auto& db = r.instance.db;
        for (const auto& [name, rel] : db.relations) {
            if (name == r.annotated) continue;
            for (const auto& v : rel.annotations) ASSERT_EQ(v, db.semiring.one()) << c.text << " " << name;
        }
        ASSERT_TRUE(r.instance.query.is_full());
        ASSERT_GE(r.instance.query.atom_of(r.annotated), 0) << c.text;
        ASSERT_EQ(oracle_lines(r.instance.query, db), oracle_lines(c.query, c.db)) << c.text;
        ++checked;
    }
    EXPECT_GE(checked, 1000);
}

TEST(Rewrite, DeannotatePlacesY) {
    Rng rng(71);
    dacq::testing::GenConfig cfg;
    cfg.self_join = 0.0;
    int checked = 0;
    for (int i = 0; i < 6000 && checked < 1000; ++i) {
        auto c = dacq::testing::random_star_case(rng, cfg);
        const Query& q = c.query;
        if (!q.has_star() || !q.is_full()) continue;
        for (std::size_t atom = 0; atom < q.body.size(); ++atom) {
            Query d = deannotate(q, q.body[atom].relation);
            int y = d.var_id(kAnnotationVar);
            ASSERT_GE(y, 0);
            EXPECT_FALSE(d.has_star());
            VarSet rv = q.atom_vars(atom);
            for (std::size_t j = 0; j < d.body.size(); ++j)
                ASSERT_EQ(has(d.atom_vars(j), y), subset(rv, q.atom_vars(j))) << to_string(q);
            std::vector<int> without_y, without_star;
            for (const auto& h : d.head)
                if (h.var != y) without_y.push_back(h.var);
            for (const auto& h : q.head)
                if (h.kind == HeadEntry::Kind::Var) without_star.push_back(h.var);
            ASSERT_EQ(without_y, without_star) << to_string(q);
            VarSet before = 0;
            for (int v : q.vars_before_star()) before |= bit(v);
            if (!subset(rv, before)) {
                ASSERT_EQ(d.head[*q.star_position()].var, y) << to_string(q);
            }
            ++checked;
        }
    }
    EXPECT_GE(checked, 1000);
}
