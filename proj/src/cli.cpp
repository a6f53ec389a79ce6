#include "dacq/cli.hpp"

#include "dacq/error.hpp"
#include "dacq/hypergraph.hpp"
#include "dacq/planner.hpp"
#include "dacq/translate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>

namespace dacq::cli {

namespace {

class ManifestParser {
public:
    explicit ManifestParser(std::string_view text) : text_(text) {}

    nlohmann::json run() {
        nlohmann::json out = nlohmann::json::object();
        for (;;) {
            skip(true);
            if (pos_ >= text_.size()) return out;
            std::string key = word();
            skip(false);
            expect('=');
            out[key] = value();
            skip(false);
            if (pos_ < text_.size() && text_[pos_] != '\n') fail("expected end of line");
        }
    }

private:
    void skip(bool newlines) {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
                ++pos_;
            } else {
                break;
            }
        }
    }
    void expect(char c) {
        skip(true);
        if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    bool accept(char c) {
        skip(true);
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    std::string word() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       std::string_view("_-.:/+").find(text_[pos_]) != std::string_view::npos))
            ++pos_;
        if (start == pos_) fail("expected a key or value");
        return std::string(text_.substr(start, pos_ - start));
    }
    nlohmann::json value() {
        skip(true);
        if (pos_ >= text_.size()) fail("missing value");
        char c = text_[pos_];
        if (c == '"' || c == '\'') {
            ++pos_;
            std::string s;
            while (pos_ < text_.size() && text_[pos_] != c) {
                if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
                s += text_[pos_++];
            }
            if (pos_ >= text_.size()) fail("unterminated string");
            ++pos_;
            return s;
        }
        if (c == '[') {
            ++pos_;
            nlohmann::json arr = nlohmann::json::array();
            while (!accept(']')) {
                arr.push_back(value());
                if (!accept(',')) {
                    expect(']');
                    break;
                }
            }
            return arr;
        }
        if (c == '{') {
            ++pos_;
            nlohmann::json obj = nlohmann::json::object();
            while (!accept('}')) {
                skip(true);
                std::string key = word();
                expect('=');
                obj[key] = value();
                if (!accept(',')) {
                    expect('}');
                    break;
                }
            }
            return obj;
        }
        std::string w = word();
        if (w == "true") return true;
        if (w == "false") return false;
        if (!w.empty() && std::all_of(w.begin(), w.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
            return std::stoull(w);
        return w;
    }
    [[noreturn]] void fail(const std::string& msg) {
        std::size_t line = 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(std::min(pos_, text_.size())), '\n'));
        throw Error(ErrorCode::Syntax, "manifest line " + std::to_string(line) + ": " + msg);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

nlohmann::json parse_manifest_text(std::string_view text) { return ManifestParser(text).run(); }

Manifest load_manifest(const std::string& path) {
    nlohmann::json j = parse_manifest_text(read_file(path));
    Manifest m;
    m.dir = std::filesystem::path(path).parent_path();
    auto need = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
        if (!obj.contains(key)) throw Error(ErrorCode::Syntax, std::string("manifest lacks '") + key + "'");
        return obj.at(key);
    };
    try {
        for (const auto& r : need(j, "relations")) {
            Manifest::Rel rel;
            rel.name = need(r, "name").get<std::string>();
            rel.path = need(r, "path").get<std::string>();
            rel.arity = need(r, "arity").get<std::size_t>();
            if (r.contains("annot_col")) rel.annot_col = r.at("annot_col").get<bool>();
            m.relations.push_back(rel);
        }
        m.query = need(j, "query").get<std::string>();
        if (j.contains("semiring")) m.semiring = j.at("semiring").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Syntax, std::string("manifest: ") + e.what());
    }
    return m;
}

SemiringKind parse_semiring_spec(const std::string& spec, const std::filesystem::path& dir) {
    if (spec == "counting") return {Kind::Counting, {}};
    if (spec == "numeric") return {Kind::Numeric, {}};
    if (spec == "mintrop") return {Kind::MinTropical, {}};
    if (spec == "maxtrop") return {Kind::MaxTropical, {}};
    if (spec == "avg") return {Kind::Avg, {}};
    if (spec.rfind("set:", 0) == 0) return {Kind::Set, read_domain_file((dir / spec.substr(4)).string())};
    throw Error(ErrorCode::Usage, "unknown semiring '" + spec + "'");
}

namespace {

struct Options {
    std::string manifest;
    std::optional<std::string> semiring;
    std::vector<std::string> annot_cols;
    std::optional<std::string> local;
    bool explain = false;
    bool bigint = false;
    std::string emit_tree;
};

struct Workspace {
    Query query;
    std::vector<RawRelation> raws;
    SemiringKind kind;
    bool kind_given = false;
    std::optional<std::vector<Const>> domain;
    std::string digest;
};

Workspace load_workspace(const Options& o) {
    Manifest m = load_manifest(o.manifest);
    Workspace w;
    std::string query_text = read_file(m.dir / m.query);
    w.query = parse_query(query_text);
    std::string spec = o.semiring.value_or(m.semiring);
    w.kind = parse_semiring_spec(spec, m.dir);
    w.kind_given = true;
    if (w.kind.tag == Kind::Set) w.domain = w.kind.domain;
    std::size_t h = std::hash<std::string>{}(query_text) ^ (std::hash<std::string>{}(spec) << 1);
    for (const auto& r : m.relations) {
        bool annot = r.annot_col || std::find(o.annot_cols.begin(), o.annot_cols.end(), r.name) != o.annot_cols.end();
        w.raws.push_back(load_relation((m.dir / r.path).string(), r.name, r.arity, annot));
        h = h * 1000003 ^ std::hash<std::string>{}(r.name + r.path + (annot ? "+" : "-"));
    }
    for (const auto& name : o.annot_cols)
        if (std::none_of(m.relations.begin(), m.relations.end(), [&](const auto& r) { return r.name == name; }))
            throw Error(ErrorCode::Usage, "--annot-col names unknown relation " + name);
    w.digest = std::to_string(h) + "|" + o.manifest;
    return w;
}

/// Database restricted to the relations the query reads.
AnnotatedDatabase annotated(const Workspace& w) {
    std::vector<RawRelation> used;
    for (const auto& r : w.raws)
        if (w.query.atom_of(r.relation.name) >= 0) used.push_back(r);
    for (const auto& a : w.query.body)
        if (std::none_of(used.begin(), used.end(), [&](const RawRelation& r) { return r.relation.name == a.relation; }))
            throw Error(ErrorCode::Semantic, "query reads relation " + a.relation + " which the manifest does not declare");
    return annotate_database(used, Semiring::instantiate(w.kind));
}

struct Classified {
    Certificate cert;
    std::optional<AnnotatedDatabase> db;
};

Classified classify_workspace(const Workspace& w, const Options& o) {
    Classified c;
    if (w.query.aggregate_count() > 0) {
        c.cert = classify_acq(w.query, w.domain.has_value());
        return c;
    }
    c.db = annotated(w);
    Profile p = profile_of(*c.db);
    if (o.local) {
        if (w.query.atom_of(*o.local) < 0) throw Error(ErrorCode::Usage, "--local names relation " + *o.local + " outside the query");
        if (!p.all_one && p.annotated != *o.local)
            throw Error(ErrorCode::NotLocallyAnnotated, "facts outside " + *o.local + " carry annotations other than 1");
        p = Profile{false, *o.local};
    }
    c.cert = classify(w.query, c.db->semiring, p);
    return c;
}

int verdict_code(Verdict v) {
    switch (v) {
    case Verdict::Tractable: return 0;
    case Verdict::Intractable: return 2;
    case Verdict::Unknown: return 3;
    }
    return 3;
}

void explain(const std::vector<RewriteStep>& steps, std::ostream& err) {
    for (const auto& s : steps) err << s.tag << ": " << s.detail << "\n    " << s.after << "\n";
}

void emit_tree(const Query& q, std::ostream& err) {
    Hypergraph h = hypergraph_of(q);
    if (!is_acyclic(h)) {
        err << "// query is cyclic; no join tree\n";
        return;
    }
    if (auto ext = ext_connex_tree(h, q.free_vars())) err << to_dot(ext->tree, q);
    else err << to_dot(std::get<JoinTree>(gyo_acyclic(h)), q);
}

std::map<std::string, std::shared_ptr<Engine>>& engine_cache() {
    static std::map<std::string, std::shared_ptr<Engine>> cache;
    return cache;
}

std::shared_ptr<Engine> build_engine(const Workspace& w, const Classified& c, const Options& o) {
    std::string key = w.digest + (o.bigint ? "|big" : "|64") + "|" + o.local.value_or("");
    auto& cache = engine_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    PrepareOptions po{o.bigint};
    std::shared_ptr<Engine> e = w.query.aggregate_count() > 0 ? prepare_acq(c.cert, w.query, w.raws, w.domain, po)
                                                              : prepare(c.cert, w.query, *c.db, po);
    cache[key] = e;
    return e;
}

int cmd_classify(const Options& o, std::ostream& out, std::ostream& err) {
    Workspace w = load_workspace(o);
    Classified c = classify_workspace(w, o);
    if (o.emit_tree == "dot") emit_tree(w.query, err);
    if (o.explain && c.cert.plan) explain(c.cert.plan->chain, err);
    out << c.cert.to_json(w.query).dump(2) << "\n";
    return verdict_code(c.cert.verdict);
}

std::pair<Integer, Integer> parse_range(const std::string& text) {
    auto dots = text.find("..");
    if (dots == std::string::npos) throw Error(ErrorCode::Usage, "range must look like a..b");
    auto a = parse_integer(text.substr(0, dots));
    auto b = parse_integer(text.substr(dots + 2));
    if (!a || !b || *a < 1 || *b < *a) throw Error(ErrorCode::Usage, "bad range '" + text + "'");
    return {*a, *b};
}

int cmd_get(const Options& o, const std::optional<std::string>& index, const std::optional<std::string>& range,
            const std::optional<std::string>& quantile, std::ostream& out, std::ostream& err) {
    int chosen = (index ? 1 : 0) + (range ? 1 : 0) + (quantile ? 1 : 0);
    if (chosen != 1) throw Error(ErrorCode::Usage, "give exactly one of an index, --range or --quantile");
    Workspace w = load_workspace(o);
    Classified c = classify_workspace(w, o);
    if (o.emit_tree == "dot") emit_tree(w.query, err);
    if (!c.cert.tractable()) {
        err << "not tractable: " << c.cert.to_json(w.query).dump() << "\n";
        return verdict_code(c.cert.verdict);
    }
    auto engine = build_engine(w, c, o);
    if (o.explain) explain(engine->executed(), err);
    Integer first, last;
    if (index) {
        auto i = parse_integer(*index);
        if (!i || *i < 1) throw Error(ErrorCode::Usage, "index must be a positive integer");
        first = last = *i;
    } else if (range) {
        std::tie(first, last) = parse_range(*range);
    } else {
        auto qr = parse_rational(*quantile);
        if (!qr || *qr < 0 || *qr > 1) throw Error(ErrorCode::Usage, "quantile must be a number in [0, 1]");
        Rational scaled = *qr * Rational(engine->count());
        Integer i = numerator(scaled) / denominator(scaled);
        if (Rational(i) < scaled) ++i;
        first = last = std::max(Integer(1), i);
    }
    Integer n = engine->count();
    for (Integer i = first; i <= last; ++i) {
        auto a = engine->get(i);
        if (!a) {
            err << "warning: index " << i.str() << " exceeds the answer count " << n.str() << "\n";
            break;
        }
        out << engine->order().format(*a) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Bench

std::vector<RawRelation> path3_instance(std::size_t n, std::mt19937_64& rng) {
    std::size_t per = std::max<std::size_t>(1, n / 3);
    std::uniform_int_distribution<std::uint64_t> value(1, per);
    std::vector<RawRelation> out;
    for (const char* name : {"R", "S", "T"}) {
        RawRelation raw;
        raw.relation.name = name;
        raw.relation.arity = 2;
        std::vector<std::pair<std::uint64_t, std::uint64_t>> rows;
        rows.reserve(per);
        for (std::size_t i = 0; i < per; ++i) rows.emplace_back(value(rng), value(rng));
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        std::shuffle(rows.begin(), rows.end(), rng);
        for (auto [a, b] : rows) {
            Const cells[2] = {intern(std::to_string(a)), intern(std::to_string(b))};
            raw.relation.cells.insert(raw.relation.cells.end(), cells, cells + 2);
            ++raw.relation.rows;
        }
        out.push_back(std::move(raw));
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

}  // namespace

nlohmann::json run_bench(const BenchConfig& cfg) {
    if (cfg.generator != "path3") throw Error(ErrorCode::Usage, "unknown generator '" + cfg.generator + "'");
    if (cfg.reps < 1 || cfg.probes < 1 || cfg.log_sizes.empty()) throw Error(ErrorCode::Usage, "bench needs reps, probes and sizes");
    using Clock = std::chrono::steady_clock;
    Query q = parse_query("Q(x1, x2, *) :- R(x1, x2), S(x2, x3), T(x3, x4).");
    Semiring s = Semiring::instantiate({Kind::Counting, {}});
    std::mt19937_64 rng(cfg.seed);
    nlohmann::json sizes = nlohmann::json::array(), build = nlohmann::json::array(), access = nlohmann::json::array(),
                   counts = nlohmann::json::array(), latencies = nlohmann::json::array(),
                   facts = nlohmann::json::array();
    std::vector<double> build_medians, access_medians, logs;
    for (int lg : cfg.log_sizes) {
        std::size_t n = std::size_t{1} << lg;
        std::vector<double> build_ms, access_us;
        std::vector<double> probe_us;
        std::string count;
        std::size_t fact_count = 0;
        for (int rep = 0; rep < cfg.reps; ++rep) {
            auto raws = path3_instance(n, rng);
            AnnotatedDatabase db = annotate_database(raws, s);
            fact_count = db.total_facts();
            Certificate cert = classify(q, s, profile_of(db));
            auto t0 = Clock::now();
            auto engine = prepare(cert, q, db, PrepareOptions{cfg.bigint});
            auto t1 = Clock::now();
            build_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            Integer total = engine->count();
            count = total.str();
            std::vector<double> lat;
            if (total > 0) {
                std::uniform_int_distribution<std::uint64_t> pick(1, static_cast<std::uint64_t>(total));
                std::vector<Integer> idx;
                for (int p = 0; p < cfg.probes; ++p) idx.emplace_back(pick(rng));
                for (const auto& i : idx) {
                    auto a0 = Clock::now();
                    auto a = engine->get(i);
                    auto a1 = Clock::now();
                    if (!a) throw Error(ErrorCode::Semantic, "bench probe fell outside the answers");
                    lat.push_back(std::chrono::duration<double, std::micro>(a1 - a0).count());
                }
                access_us.push_back(median(lat));
            }
            probe_us = std::move(lat);
        }
        double bm = median(build_ms);
        double am = access_us.empty() ? 0.0 : median(access_us);
        sizes.push_back(n);
        facts.push_back(fact_count);
        build.push_back(bm);
        access.push_back(am);
        counts.push_back(count);
        latencies.push_back(probe_us);
        build_medians.push_back(bm);
        access_medians.push_back(am);
        logs.push_back(lg);
    }
    nlohmann::json ratios = nlohmann::json::array();
    std::vector<double> ratio_values;
    for (std::size_t i = 1; i < build_medians.size(); ++i)
        ratio_values.push_back(build_medians[i - 1] > 0 ? build_medians[i] / build_medians[i - 1] : 0.0);
    for (double r : ratio_values) ratios.push_back(r);
    double slope = 0.0;
    if (logs.size() > 1) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < logs.size(); ++i) {
            mx += logs[i];
            my += access_medians[i];
        }
        mx /= logs.size();
        my /= logs.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < logs.size(); ++i) {
            sxy += (logs[i] - mx) * (access_medians[i] - my);
            sxx += (logs[i] - mx) * (logs[i] - mx);
        }
        slope = sxx > 0 ? sxy / sxx : 0.0;
    }
    return {{"generator", cfg.generator},
            {"query", to_string(q)},
            {"reps", cfg.reps},
            {"probes", cfg.probes},
            {"sizes", sizes},
            {"facts", facts},
            {"answers", counts},
            {"build_ms_median", build},
            {"access_us_median", access},
            {"doubling_ratios", ratios},
            {"doubling_ratio_median", ratio_values.empty() ? 0.0 : median(ratio_values)},
            {"access_latency_us", latencies},
            {"access_slope_us_per_log2n", slope}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Direct access to ranked answers of annotated conjunctive queries"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("manifest", o.manifest, "workspace manifest")->required();
        sub->add_option("--semiring", o.semiring, "counting|numeric|mintrop|maxtrop|avg|set:<domain-file>");
        sub->add_option("--annot-col", o.annot_cols, "relation whose last CSV column holds annotations");
        sub->add_option("--local", o.local, "assert that only this relation carries annotations");
        sub->add_flag("--explain", o.explain, "print the rewrite chain on stderr");
        sub->add_option("--emit-tree", o.emit_tree, "print the join tree on stderr")->check(CLI::IsMember({"dot"}));
    };
    auto* classify_cmd = app.add_subcommand("classify", "print the tractability certificate");
    common(classify_cmd);
    auto* get_cmd = app.add_subcommand("get", "print answers by position");
    common(get_cmd);
    std::optional<std::string> index, range, quantile;
    get_cmd->add_option("index", index, "1-based answer index");
    get_cmd->add_option("--range", range, "answers a..b");
    get_cmd->add_option("--quantile", quantile, "answer at max(1, ceil(q * count))");
    get_cmd->add_flag("--bigint", o.bigint, "arbitrary-precision answer counts");
    auto* bench_cmd = app.add_subcommand("bench", "time preprocessing and access on generated instances");
    BenchConfig bc;
    std::string size_text = "14..18";
    std::optional<std::string> out_path;
    bench_cmd->add_option("--generator", bc.generator, "instance generator")->capture_default_str();
    bench_cmd->add_option("--sizes", size_text, "log2 sizes a..b")->capture_default_str();
    bench_cmd->add_option("--reps", bc.reps, "repetitions per size")->capture_default_str();
    bench_cmd->add_option("--probes", bc.probes, "random access probes per repetition")->capture_default_str();
    bench_cmd->add_option("--seed", bc.seed, "generator seed")->capture_default_str();
    bench_cmd->add_flag("--bigint", bc.bigint, "arbitrary-precision weights");
    bench_cmd->add_option("--out", out_path, "write JSON here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    try {
        if (*classify_cmd) return cmd_classify(o, out, err);
        if (*get_cmd) return cmd_get(o, index, range, quantile, out, err);
        auto dots = size_text.find("..");
        bc.log_sizes.clear();
        if (dots == std::string::npos) {
            bc.log_sizes.push_back(std::stoi(size_text));
        } else {
            int a = std::stoi(size_text.substr(0, dots)), b = std::stoi(size_text.substr(dots + 2));
            if (a < 1 || b < a || b > 26) throw Error(ErrorCode::Usage, "sizes must be a..b with 1 <= a <= b <= 26");
            for (int i = a; i <= b; ++i) bc.log_sizes.push_back(i);
        }
        nlohmann::json j = run_bench(bc);
        if (out_path) {
            std::ofstream f(*out_path);
            if (!f) throw Error(ErrorCode::Io, "cannot write " + *out_path);
            f << j.dump(2) << "\n";
        } else {
            out << j.dump(2) << "\n";
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace dacq::cli
