#include "dacq/database.hpp"
#include "dacq/error.hpp"
#include "dacq/oracle.hpp"
#include "dacq/translate.hpp"
#include "gen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

using namespace dacq;
using dacq::testing::Rng;

namespace {

ErrorCode load_error(const std::string& csv, std::size_t arity, bool annot) {
    try {
        parse_relation(csv, "R", arity, annot);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::Usage;
}

std::map<std::vector<Const>, Value> by_group(const OracleResult& r) {
    std::map<std::vector<Const>, Value> out;
    for (std::size_t i = 0; i < r.answers.size(); ++i) {
        std::vector<Const> key;
        for (const auto& d : r.answers[i])
            if (const Const* c = std::get_if<Const>(&d)) key.push_back(*c);
        out.emplace(key, r.values[i]);
    }
    return out;
}

}  // namespace

TEST(Database, LoadPlain) {
    auto r = parse_relation("1,5\n2,5\n", "Teams", 2, false);
    EXPECT_EQ(r.relation.rows, 2u);
    EXPECT_FALSE(r.annotation_column.has_value());
    EXPECT_EQ(const_text(r.relation.row(1)[0]), "2");
}

TEST(Database, LoadFromFile) {
    auto dir = std::filesystem::temp_directory_path() / "dacq_db_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "t.csv") << "1,5\n2,5\n";
    auto r = load_relation((dir / "t.csv").string(), "T", 2, false);
    EXPECT_EQ(r.relation.rows, 2u);
    EXPECT_THROW(load_relation((dir / "missing.csv").string(), "T", 2, false), Error);
    std::filesystem::remove_all(dir);
}

TEST(Database, ReplaysWithAnnotations) {
    auto r = parse_relation("1,1,1\n1,31,31\n1,50,50\n2,5,5\n1,90,90\n", "Replays", 2, true);
    ASSERT_EQ(r.relation.rows, 5u);
    ASSERT_TRUE(r.annotation_column);
    auto db = annotate_database({r}, Semiring::instantiate({Kind::Numeric, {}}));
    std::vector<std::string> seen;
    for (const auto& v : db.at("Replays").annotations) seen.push_back(db.semiring.format(v));
    EXPECT_EQ(seen, (std::vector<std::string>{"1", "31", "50", "5", "90"}));
    EXPECT_EQ(db.annotated_relation, std::optional<std::string>("Replays"));
    EXPECT_FALSE(db.all_one);
}

TEST(Database, Errors) {
    EXPECT_EQ(load_error("1,2,3\n", 2, false), ErrorCode::ArityMismatch);
    EXPECT_EQ(load_error("1,2\n1,2\n", 2, false), ErrorCode::DuplicateFact);
    auto r = parse_relation("1,abc\n", "R", 1, true);
    try {
        annotate_database({r}, Semiring::instantiate({Kind::Numeric, {}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AnnotationParse);
    }
}

TEST(Database, CountRuleIsAllOne) {
    Query q = parse_query("Q(p,c,o,Count()) :- Teams(p,c), Sponsors(o,c), Goals(g,p,t).");
    auto t = translate_acq(q);
    std::vector<RawRelation> raws = {make_relation("Teams", 2, {{"1", "5"}}), make_relation("Sponsors", 2, {{"9", "5"}}),
                                     make_relation("Goals", 3, {{"1", "1", "31"}})};
    auto db = annotate_with_rule(t, raws);
    EXPECT_TRUE(db.all_one);
    EXPECT_FALSE(db.annotated_relation);
    EXPECT_TRUE(db.locally_annotated());
}

TEST(Database, SumRuleAnnotatesReplays) {
    Query q = parse_query("Q(c, Sum(t)) :- Teams(p,c), Goals(g,p,t), Replays(g,t).");
    auto t = translate_acq(q);
    std::vector<RawRelation> raws = {make_relation("Teams", 2, {{"1", "5"}}),
                                     make_relation("Goals", 3, {{"1", "1", "31"}}),
                                     make_relation("Replays", 2, {{"1", "31"}, {"2", "5"}})};
    auto db = annotate_with_rule(t, raws);
    EXPECT_EQ(db.annotated_relation, std::optional<std::string>("Replays"));
    EXPECT_EQ(db.semiring.format(db.at("Replays").annotations[0]), "31");
    EXPECT_EQ(db.semiring.format(db.at("Replays").annotations[1]), "5");
}

TEST(Database, ProfileMatchesData) {
    Rng rng(8);
    dacq::testing::GenConfig cfg;
    int checks = 0;
    for (int i = 0; i < 1000; ++i) {
        auto c = dacq::testing::random_star_case(rng, cfg);
        std::vector<std::string> carriers;
        for (const auto& [name, rel] : c.db.relations) {
            for (const auto& v : rel.annotations) {
                if (v == c.db.semiring.one()) continue;
                carriers.push_back(name);
                break;
            }
        }
        EXPECT_EQ(c.db.all_one, carriers.empty());
        if (carriers.size() == 1) {
            EXPECT_EQ(c.db.annotated_relation, std::optional<std::string>(carriers[0]));
        } else {
            EXPECT_FALSE(c.db.annotated_relation);
        }
        ++checks;
    }
    EXPECT_EQ(checks, 1000);
}

TEST(Database, TranslationAgreesWithDirectAggregation) {
    Rng rng(21);
    dacq::testing::GenConfig cfg;
    cfg.max_facts = 12;
    int compared = 0;
    for (int i = 0; i < 1500; ++i) {
        auto c = dacq::testing::random_acq_case(rng, cfg, 1, i % 2 == 0);
        auto direct = brute_force(c.query, annotate_database(c.raws, Semiring::instantiate({})));
        std::size_t slot = *c.query.star_position();
        AggFn fn = c.query.head[slot].fn;
        auto t = translate_acq(c.query, 0, c.domain);
        auto db = annotate_with_rule(t, c.raws);
        auto translated = brute_force(t.query, db);
        auto want = by_group(direct);
        auto got = by_group(translated);
        ASSERT_EQ(want.size(), got.size()) << c.text;
        for (const auto& [key, value] : got) {
            auto it = want.find(key);
            ASSERT_NE(it, want.end()) << c.text;
            ASSERT_EQ(finalize(fn, value), it->second) << c.text;
        }
        ++compared;
    }
    EXPECT_EQ(compared, 1500);
}
