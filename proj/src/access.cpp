#include "dacq/access.hpp"

#include "dacq/error.hpp"
#include "dacq/hypergraph.hpp"
#include "dacq/tuple_index.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <unordered_map>

namespace dacq {

namespace {

struct Checked {
    static std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
        std::uint64_t r;
        if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorCode::WeightOverflow, "answer count exceeds 64 bits; use --bigint");
        return r;
    }
    static std::uint64_t add(std::uint64_t a, std::uint64_t b) {
        std::uint64_t r;
        if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorCode::WeightOverflow, "answer count exceeds 64 bits; use --bigint");
        return r;
    }
    static Integer widen(std::uint64_t a) { return Integer(a); }
    static std::uint64_t narrow(const Integer& a) { return static_cast<std::uint64_t>(a); }
};

struct Big {
    static Integer mul(const Integer& a, const Integer& b) { return a * b; }
    static Integer add(const Integer& a, const Integer& b) { return a + b; }
    static Integer widen(const Integer& a) { return a; }
    static Integer narrow(const Integer& a) { return a; }
};

template <class W>
using Ops = std::conditional_t<std::is_same_v<W, std::uint64_t>, Checked, Big>;

// Cell -> rank. Dense table when cell ids are compact, sorted pairs otherwise.
class RankMap {
public:
    void assign(std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
        dense_.clear();
        sparse_.clear();
        std::uint32_t hi = 0;
        for (const auto& pr : pairs) hi = std::max(hi, pr.first);
        if (!pairs.empty() && hi <= 8 * pairs.size() + 4096) {
            dense_.assign(std::size_t{hi} + 1, kMissing);
            for (const auto& [cell, rank] : pairs) dense_[cell] = rank;
        } else {
            std::sort(pairs.begin(), pairs.end());
            sparse_ = std::move(pairs);
        }
    }
    std::uint32_t at(std::uint32_t cell) const {
        if (!dense_.empty()) {
            if (cell < dense_.size() && dense_[cell] != kMissing) return dense_[cell];
        } else {
            auto it = std::lower_bound(sparse_.begin(), sparse_.end(), std::make_pair(cell, std::uint32_t{0}));
            if (it != sparse_.end() && it->first == cell) return it->second;
        }
        throw Error(ErrorCode::Semantic, "internal: constant without a rank");
    }

private:
    static constexpr std::uint32_t kMissing = 0xffffffffu;
    std::vector<std::uint32_t> dense_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> sparse_;
};

struct VarRanks {
    RankMap rank;
    std::vector<std::uint32_t> representative;
};

template <class W>
struct Layer {
    int var = -1;
    std::vector<int> columns;  // PN in order position, then var
    int parent = -1;
    std::vector<int> children;
    std::size_t width = 0;
    std::vector<std::uint32_t> keys;
    std::vector<Value> ann;  // empty when no atom lands here
    std::vector<W> weight;
    std::vector<W> before;
    std::vector<std::uint32_t> child_bucket;  // rows x children
    std::vector<std::uint32_t> bucket_start;  // buckets + 1
    std::vector<W> bucket_total;

    std::size_t rows() const { return weight.size(); }
    std::size_t buckets() const { return bucket_total.size(); }
    const std::uint32_t* row(std::size_t i) const { return keys.data() + i * width; }
};

template <class W>
class LexIndex final : public LexStructure {
public:
    LexIndex(const Query& q, const AnnotatedDatabase& db, const std::vector<int>& order, const LexOptions& opt)
        : semiring_(db.semiring), order_(order), prefix_layers_(opt.prefix_layers) {
        build(q, db, opt);
    }

    Integer count() const override { return Ops<W>::widen(total_); }

    std::optional<LexAnswer> access(const Integer& i) const override {
        if (i < 1) throw Error(ErrorCode::IndexOutOfRange, "answer indices start at 1");
        if (i > Ops<W>::widen(total_)) return std::nullopt;
        std::size_t n = layers_.size();
        W r = Ops<W>::narrow(Integer(i - 1));
        W prod = total_;
        std::vector<std::uint32_t> sel(n);
        LexAnswer out;
        out.cells.resize(n);
        out.annotation = global_;
        out.prefix = global_;
        for (std::size_t p = 0; p < n; ++p) {
            const Layer<W>& L = layers_[p];
            std::uint32_t b = 0;
            if (L.parent >= 0) {
                const Layer<W>& P = layers_[L.parent];
                std::size_t slot = static_cast<std::size_t>(
                    std::find(P.children.begin(), P.children.end(), static_cast<int>(p)) - P.children.begin());
                b = P.child_bucket[sel[L.parent] * P.children.size() + slot];
            }
            W rest = prod / L.bucket_total[b];
            W q = r / rest;
            auto first = L.before.begin() + L.bucket_start[b];
            auto last = L.before.begin() + L.bucket_start[b + 1];
            auto it = std::upper_bound(first, last, q) - 1;
            std::size_t j = static_cast<std::size_t>(it - L.before.begin());
            r -= L.before[j] * rest;
            prod = rest * L.weight[j];
            sel[p] = static_cast<std::uint32_t>(j);
            out.cells[p] = ranks_[p].representative[L.row(j)[L.width - 1]];
            if (!L.ann.empty()) {
                out.annotation = semiring_.times(out.annotation, L.ann[j]);
                if (p < prefix_layers_) out.prefix = semiring_.times(out.prefix, L.ann[j]);
            }
        }
        return out;
    }

    LexStats stats() const override {
        LexStats s;
        for (const auto& L : layers_) {
            s.layer_rows.push_back(L.rows());
            s.layer_buckets.push_back(L.buckets());
        }
        std::vector<std::size_t> depth(layers_.size(), 1);
        for (std::size_t p = 0; p < layers_.size(); ++p) {
            if (layers_[p].parent >= 0) depth[p] = depth[layers_[p].parent] + 1;
            s.depth = std::max(s.depth, depth[p]);
        }
        s.total = Ops<W>::widen(total_).str();
        return s;
    }

    bool check_invariants() const override {
        Integer product = global_present_ ? 1 : 0;
        for (const auto& L : layers_) {
            for (std::size_t b = 0; b < L.buckets(); ++b) {
                Integer running = 0;
                for (std::size_t j = L.bucket_start[b]; j < L.bucket_start[b + 1]; ++j) {
                    if (Ops<W>::widen(L.before[j]) != running) return false;
                    if (L.weight[j] == W(0)) return false;
                    running += Ops<W>::widen(L.weight[j]);
                }
                if (running != Ops<W>::widen(L.bucket_total[b])) return false;
            }
            if (L.parent < 0) product *= L.buckets() == 1 ? Ops<W>::widen(L.bucket_total[0]) : Integer(0);
        }
        if (layers_.empty()) product = global_present_ ? 1 : 0;
        return product == Ops<W>::widen(total_);
    }

    const std::vector<int>& order() const override { return order_; }

private:
    void build(const Query& q, const AnnotatedDatabase& db, const LexOptions& opt) {
        std::size_t n = order_.size();
        std::vector<int> pos(kMaxVars, -1);
        for (std::size_t p = 0; p < n; ++p) {
            if (pos[order_[p]] >= 0) throw Error(ErrorCode::Semantic, "variable repeated in access order");
            pos[order_[p]] = static_cast<int>(p);
        }
        for (std::size_t a = 0; a < q.body.size(); ++a)
            for (int v : q.body[a].vars)
                if (pos[v] < 0) throw Error(ErrorCode::NotFull, "variable " + q.var_names[v] + " is not in the order");
        Hypergraph h = hypergraph_of(q);
        auto gyo = gyo_acyclic(h);
        if (!std::holds_alternative<JoinTree>(gyo)) throw Error(ErrorCode::Cyclic, "query is cyclic");
        if (auto trio = find_disruptive_trio(h.edges, order_))
            throw Error(ErrorCode::DisruptiveTrio, "(" + q.var_names[trio->x1] + "," + q.var_names[trio->x2] + "," +
                                                       q.var_names[trio->x3] + ")");

        compute_ranks(q, db, opt, pos);

        // 0-ary atoms multiply into every answer.
        global_ = semiring_.one();
        global_present_ = true;
        for (const auto& a : q.body) {
            if (!a.vars.empty()) continue;
            const Relation& r = db.at(a.relation);
            if (r.rows == 0) global_present_ = false;
            else global_ = semiring_.times(global_, r.annotations[0]);
        }

        layers_.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            Layer<W>& L = layers_[p];
            L.var = order_[p];
            VarSet pn = 0;
            for (std::size_t a = 0; a < q.body.size(); ++a)
                if (has(q.atom_vars(a), L.var)) pn |= q.atom_vars(a);
            for (int v = 0; v < kMaxVars; ++v)
                if (has(pn, v) && pos[v] < static_cast<int>(p)) L.columns.push_back(v);
            std::sort(L.columns.begin(), L.columns.end(), [&](int a, int b) { return pos[a] < pos[b]; });
            if (!L.columns.empty()) L.parent = pos[L.columns.back()];
            L.columns.push_back(L.var);
            L.width = L.columns.size();
        }
        for (std::size_t p = 0; p < n; ++p)
            if (layers_[p].parent >= 0) layers_[layers_[p].parent].children.push_back(static_cast<int>(p));

        std::vector<std::vector<std::size_t>> assigned(n);
        for (std::size_t a = 0; a < q.body.size(); ++a) {
            if (q.body[a].vars.empty()) continue;
            int last = -1;
            for (int v : q.body[a].vars) last = std::max(last, pos[v]);
            assigned[last].push_back(a);
        }

        for (std::size_t p = n; p-- > 0;) fill_layer(q, db, p, assigned[p], pos);

        total_ = global_present_ ? W(1) : W(0);
        for (const auto& L : layers_)
            if (L.parent < 0) total_ = Ops<W>::mul(total_, L.buckets() == 1 ? L.bucket_total[0] : W(0));
        if (total_ == W(0)) {
            for (auto& L : layers_) {
                L.keys.clear();
                L.ann.clear();
                L.weight.clear();
                L.before.clear();
                L.child_bucket.clear();
                L.bucket_start.assign(1, 0);
                L.bucket_total.clear();
            }
        }
    }

    void compute_ranks(const Query& q, const AnnotatedDatabase& db, const LexOptions& opt, const std::vector<int>& pos) {
        bool descending = opt.descending_values;
        std::function<int(const Value&, const Value&)> compare = opt.value_compare;
        if (!compare) compare = [this](const Value& a, const Value& b) { return semiring_.compare(a, b); };
        ranks_.resize(order_.size());
        for (std::size_t p = 0; p < order_.size(); ++p) {
            int v = order_[p];
            std::vector<std::uint32_t> cells;
            for (std::size_t a = 0; a < q.body.size(); ++a) {
                const auto& vars = q.body[a].vars;
                auto it = std::find(vars.begin(), vars.end(), v);
                if (it == vars.end()) continue;
                std::size_t col = static_cast<std::size_t>(it - vars.begin());
                const Relation& r = db.at(q.body[a].relation);
                for (std::size_t row = 0; row < r.rows; ++row) cells.push_back(r.row(row)[col]);
            }
            VarRanks& vr = ranks_[p];
            if (has(q.value_vars, v)) {
                std::sort(cells.begin(), cells.end());
                cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
                const auto& pool = db.value_pool;
                std::stable_sort(cells.begin(), cells.end(), [&](std::uint32_t a, std::uint32_t b) {
                    return compare(pool[a], pool[b]) < 0;
                });
                std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
                pairs.reserve(cells.size());
                std::uint32_t r = 0;
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    if (i > 0 && compare(pool[cells[i - 1]], pool[cells[i]]) != 0) ++r;
                    pairs.emplace_back(cells[i], r);
                    if (vr.representative.size() == r) vr.representative.push_back(cells[i]);
                }
                if (descending) {
                    for (auto& pr : pairs) pr.second = r - pr.second;
                    std::reverse(vr.representative.begin(), vr.representative.end());
                }
                vr.rank.assign(std::move(pairs));
            } else {
                sort_unique_constants(cells);
                std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
                pairs.reserve(cells.size());
                for (std::size_t i = 0; i < cells.size(); ++i) pairs.emplace_back(cells[i], static_cast<std::uint32_t>(i));
                vr.rank.assign(std::move(pairs));
                vr.representative = std::move(cells);
            }
        }
        (void)pos;
    }

    std::uint32_t rank_of(int var, std::uint32_t cell, const std::vector<int>& pos) const {
        return ranks_[pos[var]].rank.at(cell);
    }

    void fill_layer(const Query& q, const AnnotatedDatabase& db, std::size_t p, const std::vector<std::size_t>& assigned,
                    const std::vector<int>& pos) {
        Layer<W>& L = layers_[p];
        VarSet need = 0;
        for (int v : L.columns) need |= bit(v);
        int host = -1;
        for (std::size_t a = 0; a < q.body.size(); ++a) {
            if (!subset(need, q.atom_vars(a))) continue;
            if (host < 0 || db.at(q.body[a].relation).rows < db.at(q.body[host].relation).rows)
                host = static_cast<int>(a);
        }
        if (host < 0) throw Error(ErrorCode::DisruptiveTrio, "no atom holds " + q.var_names[L.var] + " with its preceding neighbours");

        // Distinct projections of the host atom, in rank space, sorted.
        const Atom& ha = q.body[host];
        const Relation& hr = db.at(ha.relation);
        std::vector<std::size_t> hcols;
        for (int v : L.columns)
            hcols.push_back(static_cast<std::size_t>(std::find(ha.vars.begin(), ha.vars.end(), v) - ha.vars.begin()));
        std::size_t w = L.width;
        std::vector<std::uint32_t> raw(hr.rows * w);
        for (std::size_t row = 0; row < hr.rows; ++row)
            for (std::size_t c = 0; c < w; ++c) raw[row * w + c] = rank_of(L.columns[c], hr.row(row)[hcols[c]], pos);
        std::vector<std::uint32_t> idx(hr.rows);
        std::iota(idx.begin(), idx.end(), 0);
        auto row_less = [&](std::uint32_t a, std::uint32_t b) {
            return std::lexicographical_compare(raw.begin() + a * w, raw.begin() + (a + 1) * w, raw.begin() + b * w,
                                                raw.begin() + (b + 1) * w);
        };
        auto row_eq = [&](std::uint32_t a, std::uint32_t b) {
            return std::equal(raw.begin() + a * w, raw.begin() + (a + 1) * w, raw.begin() + b * w);
        };
        std::sort(idx.begin(), idx.end(), row_less);
        idx.erase(std::unique(idx.begin(), idx.end(), row_eq), idx.end());

        // Agreement indices for the atoms whose last variable is here.
        struct Agree {
            std::vector<std::size_t> layer_cols;
            TupleIndex index;
            const Relation* rel;
        };
        std::vector<Agree> agree;
        for (std::size_t a : assigned) {
            const Atom& atom = q.body[a];
            const Relation& r = db.at(atom.relation);
            Agree g{{}, TupleIndex(atom.vars.size(), r.rows), &r};
            for (int v : atom.vars)
                g.layer_cols.push_back(
                    static_cast<std::size_t>(std::find(L.columns.begin(), L.columns.end(), v) - L.columns.begin()));
            std::vector<std::uint32_t> key(atom.vars.size());
            for (std::size_t row = 0; row < r.rows; ++row) {
                for (std::size_t c = 0; c < atom.vars.size(); ++c) key[c] = rank_of(atom.vars[c], r.row(row)[c], pos);
                if (!g.index.insert(key.data()).second)
                    throw Error(ErrorCode::Semantic, "internal: facts of " + atom.relation + " collide in rank space");
            }
            agree.push_back(std::move(g));
        }

        // Child bucket lookups.
        struct ChildMap {
            const Layer<W>* child;
            std::vector<std::size_t> cols;  // positions in this layer of the child's preceding neighbours
        };
        std::vector<ChildMap> kids;
        for (int c : L.children) {
            const Layer<W>& C = layers_[c];
            ChildMap m{&C, {}};
            for (std::size_t k = 0; k + 1 < C.width; ++k)
                m.cols.push_back(static_cast<std::size_t>(
                    std::find(L.columns.begin(), L.columns.end(), C.columns[k]) - L.columns.begin()));
            kids.push_back(std::move(m));
        }

        bool annotated = !agree.empty();
        std::vector<std::uint32_t> key;
        std::vector<std::uint32_t> kid_buckets(kids.size());
        for (std::uint32_t i : idx) {
            const std::uint32_t* row = raw.data() + static_cast<std::size_t>(i) * w;
            Value ann = semiring_.one();
            bool ok = true;
            for (auto& g : agree) {
                key.resize(g.layer_cols.size());
                for (std::size_t c = 0; c < key.size(); ++c) key[c] = row[g.layer_cols[c]];
                auto id = g.index.find(key.data());
                if (id < 0) {
                    ok = false;
                    break;
                }
                ann = semiring_.times(ann, g.rel->annotations[static_cast<std::size_t>(id)]);
            }
            if (!ok) continue;
            W weight = W(1);
            for (std::size_t k = 0; k < kids.size() && ok; ++k) {
                auto b = find_bucket(*kids[k].child, row, kids[k].cols);
                if (b < 0) {
                    ok = false;
                    break;
                }
                kid_buckets[k] = static_cast<std::uint32_t>(b);
                weight = Ops<W>::mul(weight, kids[k].child->bucket_total[static_cast<std::size_t>(b)]);
            }
            if (!ok) continue;
            L.keys.insert(L.keys.end(), row, row + w);
            if (annotated) L.ann.push_back(std::move(ann));
            L.weight.push_back(weight);
            L.child_bucket.insert(L.child_bucket.end(), kid_buckets.begin(), kid_buckets.end());
        }

        // Buckets share the preceding-neighbour prefix.
        std::size_t rows = L.weight.size();
        L.before.resize(rows);
        for (std::size_t j = 0; j < rows; ++j) {
            bool fresh = j == 0 || !std::equal(L.row(j), L.row(j) + (w - 1), L.row(j - 1));
            if (fresh) {
                L.bucket_start.push_back(static_cast<std::uint32_t>(j));
                L.bucket_total.push_back(W(0));
            }
            L.before[j] = L.bucket_total.back();
            L.bucket_total.back() = Ops<W>::add(L.bucket_total.back(), L.weight[j]);
        }
        L.bucket_start.push_back(static_cast<std::uint32_t>(rows));
    }

    static std::int64_t find_bucket(const Layer<W>& C, const std::uint32_t* row, const std::vector<std::size_t>& cols) {
        std::size_t lo = 0, hi = C.buckets();
        std::size_t k = cols.size();
        auto cmp = [&](std::size_t b) {  // bucket key vs wanted key
            const std::uint32_t* key = C.row(C.bucket_start[b]);
            for (std::size_t c = 0; c < k; ++c) {
                if (key[c] != row[cols[c]]) return key[c] < row[cols[c]] ? -1 : 1;
            }
            return 0;
        };
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            int c = cmp(mid);
            if (c == 0) return static_cast<std::int64_t>(mid);
            if (c < 0) lo = mid + 1;
            else hi = mid;
        }
        return -1;
    }

    Semiring semiring_;
    std::vector<int> order_;
    std::size_t prefix_layers_;
    std::vector<VarRanks> ranks_;
    std::vector<Layer<W>> layers_;
    Value global_;
    bool global_present_ = true;
    W total_ = W(0);
};

}  // namespace

std::unique_ptr<LexStructure> build_lex(const Query& q, const AnnotatedDatabase& db, const std::vector<int>& order,
                                        const LexOptions& options) {
    if (options.bigint) return std::make_unique<LexIndex<Integer>>(q, db, order, options);
    return std::make_unique<LexIndex<std::uint64_t>>(q, db, order, options);
}

CountProduct::CountProduct(const Relation& left, const Relation& right) {
    auto group = [](const Relation& r) {
        std::unordered_map<Const, std::uint64_t> counts;
        for (std::size_t i = 0; i < r.rows; ++i) ++counts[r.row(i)[0]];
        std::map<std::uint64_t, std::vector<Const>> by_count;
        for (auto [value, c] : counts) by_count[c].push_back(value);
        std::vector<std::pair<std::uint64_t, std::vector<Const>>> out;
        for (auto& [c, values] : by_count) {
            sort_unique_constants(values);
            out.emplace_back(c, std::move(values));
        }
        return out;
    };
    if (left.arity != 2 || right.arity != 2) throw Error(ErrorCode::ArityMismatch, "count product needs binary relations");
    groups_ = group(left);
    groups2_ = group(right);
    for (std::size_t a = 0; a < groups_.size(); ++a)
        for (std::size_t b = 0; b < groups2_.size(); ++b) buckets_.push_back({groups_[a].first, groups2_[b].first, a, b});
    std::sort(buckets_.begin(), buckets_.end(), [](const Bucket& a, const Bucket& b) {
        Integer pa = Integer(a.c) * a.c2, pb = Integer(b.c) * b.c2;
        if (pa != pb) return pa < pb;
        return a.c < b.c;
    });
    for (const auto& b : buckets_) {
        before_.push_back(total_);
        total_ += Integer(groups_[b.left].second.size()) * groups2_[b.right].second.size();
    }
}

std::optional<CountProduct::Answer> CountProduct::access(const Integer& d) const {
    if (d < 1) throw Error(ErrorCode::IndexOutOfRange, "answer indices start at 1");
    if (d > total_) return std::nullopt;
    // Largest i with l_i < d.
    auto it = std::lower_bound(before_.begin(), before_.end(), d) - 1;
    std::size_t i = static_cast<std::size_t>(it - before_.begin());
    const Bucket& b = buckets_[i];
    const auto& xs = groups_[b.left].second;
    const auto& ys = groups2_[b.right].second;
    Integer offset = d - before_[i] - 1;
    Integer width = ys.size();
    Answer a;
    a.count = Integer(b.c) * b.c2;
    a.x = xs[static_cast<std::size_t>(offset / width)];
    a.y = ys[static_cast<std::size_t>(offset % width)];
    return a;
}

}  // namespace dacq
