#include "dacq/query.hpp"

#include "dacq/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <set>

namespace dacq {

std::string_view to_string(AggFn fn) {
    switch (fn) {
    case AggFn::Count: return "Count";
    case AggFn::CountD: return "CountD";
    case AggFn::Sum: return "Sum";
    case AggFn::Avg: return "Avg";
    case AggFn::Min: return "Min";
    case AggFn::Max: return "Max";
    }
    return "?";
}

int Query::var_id(std::string_view n) const {
    for (std::size_t i = 0; i < var_names.size(); ++i)
        if (var_names[i] == n) return static_cast<int>(i);
    return -1;
}

int Query::add_var(std::string n) {
    if (var_names.size() >= kMaxVars) throw Error(ErrorCode::Semantic, "more than 64 variables");
    var_names.push_back(std::move(n));
    return static_cast<int>(var_names.size() - 1);
}

VarSet Query::atom_vars(std::size_t i) const {
    VarSet s = 0;
    for (int v : body[i].vars) s |= bit(v);
    return s;
}

VarSet Query::all_vars() const {
    VarSet s = 0;
    for (std::size_t i = 0; i < body.size(); ++i) s |= atom_vars(i);
    return s;
}

VarSet Query::free_vars() const {
    VarSet s = 0;
    for (const auto& h : head)
        if (h.kind == HeadEntry::Kind::Var) s |= bit(h.var);
    return s;
}

std::vector<int> Query::head_vars() const {
    std::vector<int> out;
    for (const auto& h : head)
        if (h.kind == HeadEntry::Kind::Var) out.push_back(h.var);
    return out;
}

std::optional<std::size_t> Query::star_position() const {
    for (std::size_t i = 0; i < head.size(); ++i)
        if (head[i].kind != HeadEntry::Kind::Var) return i;
    return std::nullopt;
}

bool Query::has_star() const {
    return std::any_of(head.begin(), head.end(), [](const HeadEntry& h) { return h.kind == HeadEntry::Kind::Star; });
}

std::size_t Query::aggregate_count() const {
    return std::count_if(head.begin(), head.end(), [](const HeadEntry& h) { return h.kind == HeadEntry::Kind::Agg; });
}

bool Query::self_join_free() const {
    std::set<std::string> names;
    for (const auto& a : body)
        if (!names.insert(a.relation).second) return false;
    return true;
}

std::vector<int> Query::vars_before_star() const {
    std::vector<int> out;
    for (const auto& h : head) {
        if (h.kind != HeadEntry::Kind::Var) break;
        out.push_back(h.var);
    }
    return out;
}

std::vector<int> Query::vars_after_star() const {
    std::vector<int> out;
    bool seen = false;
    for (const auto& h : head) {
        if (h.kind != HeadEntry::Kind::Var) seen = true;
        else if (seen) out.push_back(h.var);
    }
    return out;
}

int Query::atom_of(std::string_view relation) const {
    for (std::size_t i = 0; i < body.size(); ++i)
        if (body[i].relation == relation) return static_cast<int>(i);
    return -1;
}

namespace {

struct RawEntry {
    HeadEntry::Kind kind;
    std::string var;
    AggFn fn;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Query run() {
        Query q;
        q.name = upper_name();
        expect('(');
        std::vector<RawEntry> raw;
        if (!peek(')')) {
            do {
                raw.push_back(entry());
            } while (accept(','));
        }
        expect(')');
        skip_ws();
        if (text_.substr(pos_, 2) != ":-") fail("expected ':-'");
        pos_ += 2;
        do {
            Atom a;
            a.relation = upper_name();
            expect('(');
            if (!peek(')')) {
                do {
                    std::string v = lower_name();
                    int id = q.var_id(v);
                    if (id < 0) id = q.add_var(v);
                    a.vars.push_back(id);
                } while (accept(','));
            }
            expect(')');
            q.body.push_back(std::move(a));
        } while (accept(','));
        expect('.');
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");

        for (const auto& r : raw) {
            if (r.kind == HeadEntry::Kind::Star) {
                q.head.push_back(HeadEntry::star());
                continue;
            }
            int id = -1;
            if (!r.var.empty()) {
                id = q.var_id(r.var);
                if (id < 0)
                    throw Error(ErrorCode::Semantic, "head variable '" + r.var + "' does not occur in the body");
            }
            q.head.push_back(r.kind == HeadEntry::Kind::Var ? HeadEntry::variable(id) : HeadEntry::aggregate(r.fn, id));
        }
        return q;
    }

private:
    RawEntry entry() {
        if (accept('*')) return {HeadEntry::Kind::Star, "", AggFn::Count};
        skip_ws();
        if (pos_ < text_.size() && std::isupper(static_cast<unsigned char>(text_[pos_]))) {
            std::string f = upper_name();
            AggFn fn = AggFn::Count;
            if (f == "Count" || f == "COUNT") fn = AggFn::Count;
            else if (f == "CountD" || f == "COUNTD") fn = AggFn::CountD;
            else if (f == "Sum" || f == "SUM") fn = AggFn::Sum;
            else if (f == "Avg" || f == "AVG") fn = AggFn::Avg;
            else if (f == "Min" || f == "MIN") fn = AggFn::Min;
            else if (f == "Max" || f == "MAX") fn = AggFn::Max;
            else fail("unknown aggregate '" + f + "'");
            expect('(');
            std::string arg;
            if (!peek(')')) arg = lower_name();
            expect(')');
            if (fn == AggFn::Count && !arg.empty()) fail("Count takes no argument");
            if (fn != AggFn::Count && arg.empty()) fail(std::string(to_string(fn)) + " needs an argument");
            return {HeadEntry::Kind::Agg, arg, fn};
        }
        return {HeadEntry::Kind::Var, lower_name(), AggFn::Count};
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }
    bool accept(char c) {
        if (!peek(c)) return false;
        ++pos_;
        return true;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    std::string ident(bool upper) {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ >= text_.size()) fail("unexpected end of input");
        unsigned char first = static_cast<unsigned char>(text_[pos_]);
        if (upper ? !std::isupper(first) : !std::islower(first))
            fail(upper ? "expected a relation name" : "expected a variable");
        ++pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }
    std::string upper_name() { return ident(true); }
    std::string lower_name() { return ident(false); }
    [[noreturn]] void fail(const std::string& msg) {
        throw Error(ErrorCode::Syntax, msg + " at position " + std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Query parse_query(std::string_view text) {
    Query q = Parser(text).run();
    validate(q);
    return q;
}

void validate(const Query& q) {
    VarSet body = q.all_vars();
    VarSet seen = 0;
    std::size_t stars = 0;
    for (const auto& h : q.head) {
        if (h.kind == HeadEntry::Kind::Var) {
            if (!has(body, h.var)) throw Error(ErrorCode::Semantic, "head variable not in body");
            if (has(seen, h.var))
                throw Error(ErrorCode::Semantic, "head variable '" + q.var_names[h.var] + "' repeated");
            seen |= bit(h.var);
        } else {
            ++stars;
        }
    }
    if (q.has_star() && stars > 1) throw Error(ErrorCode::Semantic, "more than one computed-value entry");
    for (const auto& h : q.head) {
        if (h.kind == HeadEntry::Kind::Agg && h.var >= 0 && has(seen, h.var))
            throw Error(ErrorCode::Semantic, "aggregate argument '" + q.var_names[h.var] + "' is not existential");
    }
    if (stars > 1) {
        // Several aggregates are accepted only as a trailing block.
        auto pos = *q.star_position();
        for (std::size_t i = pos; i < q.head.size(); ++i)
            if (q.head[i].kind != HeadEntry::Kind::Agg)
                throw Error(ErrorCode::Semantic, "multiple aggregates must all come after the grouping variables");
    }
}

std::string to_string(const Query& q) {
    std::string out = q.name + "(";
    for (std::size_t i = 0; i < q.head.size(); ++i) {
        if (i) out += ", ";
        const auto& h = q.head[i];
        if (h.kind == HeadEntry::Kind::Var) out += q.var_names[h.var];
        else if (h.kind == HeadEntry::Kind::Star) out += "*";
        else out += std::string(to_string(h.fn)) + "(" + (h.var >= 0 ? q.var_names[h.var] : "") + ")";
    }
    out += ") :- ";
    for (std::size_t i = 0; i < q.body.size(); ++i) {
        if (i) out += ", ";
        out += q.body[i].relation + "(";
        for (std::size_t j = 0; j < q.body[i].vars.size(); ++j) {
            if (j) out += ", ";
            out += q.var_names[q.body[i].vars[j]];
        }
        out += ")";
    }
    return out + ".";
}

std::string var_list(const Query& q, VarSet s) {
    std::string out = "{";
    bool first = true;
    for (int v = 0; v < kMaxVars; ++v) {
        if (!has(s, v)) continue;
        if (!first) out += ",";
        out += v < static_cast<int>(q.var_names.size()) ? q.var_names[v] : "?";
        first = false;
    }
    return out + "}";
}

}  // namespace dacq
