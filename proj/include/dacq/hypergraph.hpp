#pragma once

#include "dacq/query.hpp"

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dacq {

struct Hypergraph {
    std::vector<VarSet> edges;
    VarSet vertices() const;
};

Hypergraph hypergraph_of(const Query& q);

struct JoinTree {
    struct Node {
        VarSet vars = 0;
        int atom = -1;  // originating atom, -1 for extension nodes
        bool free = false;
    };
    std::vector<Node> nodes;
    std::vector<std::pair<int, int>> edges;

    std::vector<std::vector<int>> adjacency() const;
    int add_node(VarSet vars, int atom, bool free);
    void remove_edge(int a, int b);
};

struct CyclicWitness {
    std::vector<VarSet> residue;  // edges left when GYO gets stuck
};

/// GYO ear removal; smallest-index ear first, attached to the smallest-index
/// containing edge. Node i of the returned tree is edge i.
std::variant<JoinTree, CyclicWitness> gyo_acyclic(const Hypergraph& h);
bool is_acyclic(const Hypergraph& h);

/// Independent check: the tree is a tree and every variable's nodes are connected.
bool running_intersection(const JoinTree& t);

/// Join tree of an inclusive extension whose free nodes form a connected
/// subtree covering exactly `free`. Nodes 0..m-1 are the original edges.
struct ExtTree {
    JoinTree tree;
    VarSet free = 0;
};

/// nullopt when h plus the hyperedge `free` is cyclic.
std::optional<ExtTree> ext_connex_tree(const Hypergraph& h, VarSet free);
bool is_free_connex(const Query& q);
/// Checks inclusiveness, the tree property and exactness of the free subtree.
bool valid_ext_tree(const ExtTree& t, const Hypergraph& h);

struct TrioWitness {
    int x1 = -1;
    int x2 = -1;
    int x3 = -1;
};

std::optional<TrioWitness> find_disruptive_trio(const std::vector<VarSet>& edges, const std::vector<int>& order);
std::optional<TrioWitness> find_disruptive_trio(const Query& q);

/// Ext-free-connex tree where the path from the atom's node to the free
/// subtree satisfies the anchoring conditions. `path` runs from the node
/// holding the atom to its root free node.
struct AnchoredTree {
    ExtTree ext;
    std::vector<int> path;
};

AnchoredTree anchored_ext_tree(const Query& q, std::size_t atom);
bool anchored_conditions_hold(const AnchoredTree& t);

std::string to_dot(const JoinTree& t, const Query& q);

}  // namespace dacq
