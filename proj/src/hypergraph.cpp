#include "dacq/hypergraph.hpp"

#include "dacq/error.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <queue>

namespace dacq {

VarSet Hypergraph::vertices() const {
    VarSet s = 0;
    for (VarSet e : edges) s |= e;
    return s;
}

Hypergraph hypergraph_of(const Query& q) {
    Hypergraph h;
    for (std::size_t i = 0; i < q.body.size(); ++i) h.edges.push_back(q.atom_vars(i));
    return h;
}

std::vector<std::vector<int>> JoinTree::adjacency() const {
    std::vector<std::vector<int>> adj(nodes.size());
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

int JoinTree::add_node(VarSet vars, int atom, bool free) {
    nodes.push_back({vars, atom, free});
    return static_cast<int>(nodes.size() - 1);
}

void JoinTree::remove_edge(int a, int b) {
    std::erase_if(edges, [&](const std::pair<int, int>& e) {
        return (e.first == a && e.second == b) || (e.first == b && e.second == a);
    });
}

std::variant<JoinTree, CyclicWitness> gyo_acyclic(const Hypergraph& h) {
    std::size_t m = h.edges.size();
    std::vector<VarSet> cur = h.edges;
    std::vector<bool> alive(m, true);
    JoinTree tree;
    for (std::size_t i = 0; i < m; ++i) tree.add_node(h.edges[i], static_cast<int>(i), false);
    std::size_t remaining = m;
    bool changed = true;
    while (changed && remaining > 1) {
        changed = false;
        for (int v = 0; v < kMaxVars; ++v) {
            int holder = -1;
            int count = 0;
            for (std::size_t i = 0; i < m; ++i)
                if (alive[i] && has(cur[i], v)) {
                    holder = static_cast<int>(i);
                    ++count;
                }
            if (count == 1) cur[holder] &= ~bit(v);
        }
        for (std::size_t e = 0; e < m && !changed; ++e) {
            if (!alive[e]) continue;
            for (std::size_t f = 0; f < m; ++f) {
                if (f == e || !alive[f] || !subset(cur[e], cur[f])) continue;
                alive[e] = false;
                --remaining;
                tree.edges.emplace_back(static_cast<int>(e), static_cast<int>(f));
                changed = true;
                break;
            }
        }
    }
    if (remaining <= 1) return tree;
    CyclicWitness w;
    for (std::size_t i = 0; i < m; ++i)
        if (alive[i]) w.residue.push_back(cur[i]);
    return w;
}

bool is_acyclic(const Hypergraph& h) { return std::holds_alternative<JoinTree>(gyo_acyclic(h)); }

bool running_intersection(const JoinTree& t) {
    std::size_t n = t.nodes.size();
    if (n == 0) return t.edges.empty();
    if (t.edges.size() != n - 1) return false;
    auto adj = t.adjacency();
    // Connected as a whole.
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int w : adj[u])
            if (!seen[w]) {
                seen[w] = true;
                ++reached;
                stack.push_back(w);
            }
    }
    if (reached != n) return false;
    VarSet all = 0;
    for (const auto& node : t.nodes) all |= node.vars;
    for (int v = 0; v < kMaxVars; ++v) {
        if (!has(all, v)) continue;
        std::vector<int> holders;
        for (std::size_t i = 0; i < n; ++i)
            if (has(t.nodes[i].vars, v)) holders.push_back(static_cast<int>(i));
        std::vector<bool> mark(n, false);
        std::vector<int> st{holders[0]};
        mark[holders[0]] = true;
        std::size_t count = 1;
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            for (int w : adj[u])
                if (!mark[w] && has(t.nodes[w].vars, v)) {
                    mark[w] = true;
                    ++count;
                    st.push_back(w);
                }
        }
        if (count != holders.size()) return false;
    }
    return true;
}

std::optional<ExtTree> ext_connex_tree(const Hypergraph& h, VarSet free) {
    VarSet all = h.vertices();
    std::size_t m = h.edges.size();
    if (subset(all, free) && free == all) {
        auto r = gyo_acyclic(h);
        if (!std::holds_alternative<JoinTree>(r)) return std::nullopt;
        ExtTree out{std::get<JoinTree>(std::move(r)), free};
        for (auto& node : out.tree.nodes) node.free = true;
        return out;
    }
    Hypergraph with_s = h;
    with_s.edges.push_back(free);
    auto r = gyo_acyclic(with_s);
    if (!std::holds_alternative<JoinTree>(r)) return std::nullopt;
    const JoinTree& full = std::get<JoinTree>(r);
    int s_node = static_cast<int>(m);

    ExtTree out;
    out.free = free;
    for (std::size_t i = 0; i < m; ++i) out.tree.add_node(h.edges[i], static_cast<int>(i), false);
    std::vector<int> children;
    for (auto [a, b] : full.edges) {
        if (a == s_node) children.push_back(b);
        else if (b == s_node) children.push_back(a);
        else out.tree.edges.emplace_back(a, b);
    }
    std::sort(children.begin(), children.end());

    // Free part: one node per child label c ∩ S, joined by a join tree of the labels.
    std::vector<int> k_nodes;
    std::vector<VarSet> k_labels;
    std::vector<int> unlabeled;
    for (int c : children) {
        VarSet label = h.edges[c] & free;
        if (subset(h.edges[c], free)) {
            out.tree.nodes[c].free = true;
            k_nodes.push_back(c);
            k_labels.push_back(label);
        } else if (label != 0) {
            int ext = out.tree.add_node(label, -1, true);
            out.tree.edges.emplace_back(c, ext);
            k_nodes.push_back(ext);
            k_labels.push_back(label);
        } else {
            unlabeled.push_back(c);
        }
    }
    if (k_nodes.empty()) {
        k_nodes.push_back(out.tree.add_node(0, -1, true));
        k_labels.push_back(0);
    }
    auto k_tree = gyo_acyclic(Hypergraph{k_labels});
    if (!std::holds_alternative<JoinTree>(k_tree))
        throw Error(ErrorCode::Cyclic, "internal: free-vertex labels are cyclic");
    for (auto [a, b] : std::get<JoinTree>(k_tree).edges) out.tree.edges.emplace_back(k_nodes[a], k_nodes[b]);
    for (int c : unlabeled) out.tree.edges.emplace_back(c, k_nodes.front());
    return out;
}

bool is_free_connex(const Query& q) {
    Hypergraph h = hypergraph_of(q);
    return is_acyclic(h) && ext_connex_tree(h, q.free_vars()).has_value();
}

bool valid_ext_tree(const ExtTree& t, const Hypergraph& h) {
    if (!running_intersection(t.tree)) return false;
    for (std::size_t i = 0; i < h.edges.size(); ++i) {
        bool found = false;
        for (const auto& node : t.tree.nodes)
            if (node.atom == static_cast<int>(i) && node.vars == h.edges[i]) found = true;
        if (!found) return false;
    }
    VarSet covered = 0;
    std::vector<int> free_nodes;
    for (std::size_t i = 0; i < t.tree.nodes.size(); ++i) {
        const auto& node = t.tree.nodes[i];
        bool inside = std::any_of(h.edges.begin(), h.edges.end(), [&](VarSet e) { return subset(node.vars, e); });
        if (!inside) return false;
        if (node.free) {
            covered |= node.vars;
            free_nodes.push_back(static_cast<int>(i));
        }
    }
    if (covered != t.free || free_nodes.empty()) return false;
    auto adj = t.tree.adjacency();
    std::vector<bool> mark(t.tree.nodes.size(), false);
    std::vector<int> st{free_nodes[0]};
    mark[free_nodes[0]] = true;
    std::size_t count = 1;
    while (!st.empty()) {
        int u = st.back();
        st.pop_back();
        for (int w : adj[u])
            if (!mark[w] && t.tree.nodes[w].free) {
                mark[w] = true;
                ++count;
                st.push_back(w);
            }
    }
    return count == free_nodes.size();
}

std::optional<TrioWitness> find_disruptive_trio(const std::vector<VarSet>& edges, const std::vector<int>& order) {
    auto neighbors = [&](int a, int b) {
        return std::any_of(edges.begin(), edges.end(), [&](VarSet e) { return has(e, a) && has(e, b); });
    };
    for (std::size_t k = 0; k < order.size(); ++k)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j) {
                int x1 = order[i], x2 = order[j], x3 = order[k];
                if (neighbors(x1, x3) && neighbors(x2, x3) && !neighbors(x1, x2)) return TrioWitness{x1, x2, x3};
            }
    return std::nullopt;
}

std::optional<TrioWitness> find_disruptive_trio(const Query& q) {
    return find_disruptive_trio(hypergraph_of(q).edges, q.head_vars());
}

AnchoredTree anchored_ext_tree(const Query& q, std::size_t atom) {
    Hypergraph h = hypergraph_of(q);
    VarSet free = q.free_vars();
    auto ext = is_acyclic(h) ? ext_connex_tree(h, free) : std::nullopt;
    if (!ext) throw Error(ErrorCode::NotFreeConnex, "query is not free-connex");
    AnchoredTree out{std::move(*ext), {}};
    JoinTree& t = out.ext.tree;
    int v = -1;
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].atom == static_cast<int>(atom)) v = static_cast<int>(i);
    if (v < 0) throw Error(ErrorCode::Semantic, "atom not in tree");

    if (t.nodes[v].free) {
        // Split v: the atom moves to a non-free twin hanging off v.
        int twin = t.add_node(t.nodes[v].vars, static_cast<int>(atom), false);
        t.nodes[v].atom = -1;
        t.edges.emplace_back(twin, v);
        out.path = {twin, v};
        return out;
    }

    auto adj = t.adjacency();
    std::vector<int> prev(t.nodes.size(), -1);
    std::vector<bool> seen(t.nodes.size(), false);
    std::queue<int> bfs;
    bfs.push(v);
    seen[v] = true;
    int target = -1;
    while (!bfs.empty() && target < 0) {
        int u = bfs.front();
        bfs.pop();
        for (int w : adj[u]) {
            if (seen[w]) continue;
            seen[w] = true;
            prev[w] = u;
            if (t.nodes[w].free) {
                target = w;
                break;
            }
            bfs.push(w);
        }
    }
    std::vector<int> path;
    for (int u = target; u >= 0; u = prev[u]) path.push_back(u);
    std::reverse(path.begin(), path.end());

    std::size_t k = path.size();
    std::size_t cut = k - 1;  // index of v_i (0-based) where v_{i-1}, v_i share no existential
    for (std::size_t i = 1; i < k; ++i) {
        VarSet shared = t.nodes[path[i - 1]].vars & t.nodes[path[i]].vars & ~free;
        if (shared == 0) {
            cut = i;
            break;
        }
    }
    int last_kept = path[cut - 1];
    VarSet own_free = t.nodes[last_kept].vars & free;
    if (cut == k - 1 && t.nodes[path[k - 1]].vars == own_free) {
        out.path = path;
        return out;
    }
    int root = path[k - 1];
    t.remove_edge(last_kept, path[cut]);
    int fresh = t.add_node(own_free, -1, true);
    t.edges.emplace_back(last_kept, fresh);
    t.edges.emplace_back(fresh, root);
    out.path.assign(path.begin(), path.begin() + cut);
    out.path.push_back(fresh);
    return out;
}

bool anchored_conditions_hold(const AnchoredTree& t) {
    const auto& nodes = t.ext.tree.nodes;
    const auto& p = t.path;
    if (p.size() < 2) return false;
    VarSet free = t.ext.free;
    auto adj = t.ext.tree.adjacency();
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
        if (!std::binary_search(adj[p[i]].begin(), adj[p[i]].end(), p[i + 1])) return false;
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
        if (nodes[p[i]].free) return false;
    if (!nodes[p.back()].free) return false;
    for (std::size_t i = 1; i + 1 < p.size(); ++i)
        if ((nodes[p[i - 1]].vars & nodes[p[i]].vars & ~free) == 0) return false;
    return nodes[p.back()].vars == (nodes[p[p.size() - 2]].vars & free);
}

std::string to_dot(const JoinTree& t, const Query& q) {
    std::string out = "graph jointree {\n";
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& n = t.nodes[i];
        std::string label = n.atom >= 0 ? q.body[n.atom].relation : std::string("ext");
        label += var_list(q, n.vars);
        out += "  n" + std::to_string(i) + " [label=\"" + label + "\"" +
               (n.free ? ", style=filled, fillcolor=lightgray" : "") + "];\n";
    }
    for (auto [a, b] : t.edges) out += "  n" + std::to_string(a) + " -- n" + std::to_string(b) + ";\n";
    return out + "}\n";
}

}  // namespace dacq
