#pragma once

// Edge-labelled trees (labels = squared edge lengths), locally isometric
// immersions/embeddings into Z^d, and the counting formulas: the immersion
// count is the product of sphere sizes over edges, and the embedding count
// is bounded below by the falling product along a leaf order.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latrec/lattice_spheres.hpp"

namespace latrec {

class EdgeLabelledTree {
public:
    struct Edge {
        std::string u;
        std::string v;
        Coord label = 0;  // squared edge length, >= 1
    };

    EdgeLabelledTree(std::vector<std::string> vertices, std::vector<Edge> edges)
        : vertices_(std::move(vertices)), edges_(std::move(edges)) {
        validate();
    }

    const std::vector<std::string>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ValidationError("tree: unknown vertex '" + id + "'");
        return it->second;
    }

    /// Neighbor lists sorted by vertex identifier (the declared tie-break).
    const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& adjacency() const {
        return adj_;  // (neighbor vertex index, edge index)
    }

private:
    void validate() {
        if (vertices_.empty()) throw ValidationError("tree: no vertices");
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            if (!index_.emplace(vertices_[i], i).second)
                throw ValidationError("tree: duplicate vertex '" + vertices_[i] + "'");
        }
        if (edges_.size() + 1 != vertices_.size())
            throw ValidationError("tree: need |E| = |V| - 1, got |V|=" +
                                  std::to_string(vertices_.size()) +
                                  " |E|=" + std::to_string(edges_.size()));
        adj_.assign(vertices_.size(), {});
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            const auto& edge = edges_[e];
            if (edge.label < 1)
                throw ValidationError("tree: edge {" + edge.u + "," + edge.v +
                                      "} has non-positive label");
            std::size_t a = index_of(edge.u), b = index_of(edge.v);
            if (a == b) throw ValidationError("tree: self-loop at '" + edge.u + "'");
            adj_[a].emplace_back(b, e);
            adj_[b].emplace_back(a, e);
        }
        for (auto& nbrs : adj_)
            std::sort(nbrs.begin(), nbrs.end(), [&](const auto& x, const auto& y) {
                return vertices_[x.first] < vertices_[y.first];
            });
        // |E| = |V|-1 plus connectivity makes it a tree (acyclic follows).
        std::vector<char> seen(vertices_.size(), 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!stack.empty()) {
            std::size_t v = stack.back();
            stack.pop_back();
            for (auto [w, e] : adj_[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++reached;
                    stack.push_back(w);
                }
        }
        if (reached != vertices_.size())
            throw ValidationError("tree: graph is disconnected");
    }

    std::vector<std::string> vertices_;
    std::vector<Edge> edges_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj_;
};

struct RootedTree {
    RootedTree(EdgeLabelledTree t, const std::string& root_id)
        : tree(std::move(t)), root(root_id), root_index(tree.index_of(root_id)) {}

    EdgeLabelledTree tree;
    std::string root;
    std::size_t root_index;
};

/// An edge oriented away from the root in a leaf order.
struct OrientedEdge {
    std::size_t parent = 0;
    std::size_t child = 0;
    Coord label = 0;
};

/// BFS edge order from the root, neighbors in identifier order: the first
/// edge contains the root and every prefix spans a connected subgraph.
inline std::vector<OrientedEdge> leaf_order(const RootedTree& rooted) {
    const auto& tree = rooted.tree;
    std::vector<OrientedEdge> order;
    order.reserve(tree.edges().size());
    std::vector<char> seen(tree.vertices().size(), 0);
    std::vector<std::size_t> queue{rooted.root_index};
    seen[rooted.root_index] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        std::size_t v = queue[head];
        for (auto [w, e] : tree.adjacency()[v]) {
            if (seen[w]) continue;
            seen[w] = 1;
            order.push_back({v, w, tree.edges()[e].label});
            queue.push_back(w);
        }
    }
    return order;
}

// ---------------------------------------------------------------------------
// Constructors for the standard families
// ---------------------------------------------------------------------------

/// Path v0 - v1 - ... - v_{m-1} rooted at the endpoint v0.
inline RootedTree make_path(const std::vector<Coord>& labels) {
    if (labels.empty()) throw ValidationError("make_path: empty label list");
    std::vector<std::string> vertices;
    std::vector<EdgeLabelledTree::Edge> edges;
    for (std::size_t i = 0; i <= labels.size(); ++i) vertices.push_back("v" + std::to_string(i));
    for (std::size_t i = 0; i < labels.size(); ++i)
        edges.push_back({vertices[i], vertices[i + 1], labels[i]});
    return {EdgeLabelledTree(std::move(vertices), std::move(edges)), "v0"};
}

/// Star with center v0 (the root) and one leaf per label.
inline RootedTree make_star(const std::vector<Coord>& labels) {
    if (labels.empty()) throw ValidationError("make_star: empty label list");
    std::vector<std::string> vertices{"v0"};
    std::vector<EdgeLabelledTree::Edge> edges;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        vertices.push_back("v" + std::to_string(i + 1));
        edges.push_back({"v0", vertices.back(), labels[i]});
    }
    return {EdgeLabelledTree(std::move(vertices), std::move(edges)), "v0"};
}

// ---------------------------------------------------------------------------
// Counting
// ---------------------------------------------------------------------------

/// |I(tau)| = product over edges of |S_{phi(e)}|.
inline BigInt count_immersions(const RootedTree& rooted, int d) {
    BigInt product = 1;
    for (const auto& e : rooted.tree.edges()) {
        product *= sphere_size(d, e.label);
        if (product == 0) return 0;
    }
    return product;
}

/// Falling product along the leaf order, factors clamped at zero:
/// prod_j max(|S_{phi(e_j)}| - j + 1, 0).
inline BigInt embedding_lower_bound(const RootedTree& rooted, int d) {
    BigInt product = 1;
    BigInt j = 0;
    for (const auto& e : leaf_order(rooted)) {
        BigInt factor = sphere_size(d, e.label) - j;
        ++j;
        if (factor <= 0) return 0;
        product *= factor;
    }
    return product;
}

// ---------------------------------------------------------------------------
// Immersions
// ---------------------------------------------------------------------------

struct Immersion {
    // placement[i] is the image of vertices()[i]; the root maps to 0.
    std::vector<LatticePoint> placement;
};

using Embedding = Immersion;

/// True iff the placement is injective.
inline bool is_embedding(const Immersion& imm) {
    std::vector<LatticePoint> pts = imm.placement;
    std::sort(pts.begin(), pts.end());
    return std::adjacent_find(pts.begin(), pts.end()) == pts.end();
}

/// Re-validates every edge constraint in integer arithmetic.
inline bool validate_immersion(const RootedTree& rooted, int d, const Immersion& imm) {
    const auto& tree = rooted.tree;
    if (imm.placement.size() != tree.vertices().size()) return false;
    for (const auto& p : imm.placement)
        if (static_cast<int>(p.size()) != d) return false;
    for (const auto& p : imm.placement[rooted.root_index])
        if (p != 0) return false;
    for (const auto& e : tree.edges()) {
        const auto& a = imm.placement[tree.index_of(e.u)];
        const auto& b = imm.placement[tree.index_of(e.v)];
        Coord norm = 0;
        for (int i = 0; i < d; ++i) {
            Coord diff = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
            norm += diff * diff;
        }
        if (norm != e.label) return false;
    }
    return true;
}

/// Streams every locally isometric immersion with root placed at 0, in
/// canonical depth-first order (edges in leaf_order, sphere points in
/// canonical order). The callback receives the placement vector (aligned
/// with tree.vertices(), reused between calls) and returns false to stop.
/// Returns the number of immersions emitted.
template <typename Callback>
std::uint64_t for_each_immersion(const RootedTree& rooted, int d, Callback&& cb,
                                 const Limits& limits = default_limits()) {
    auto order = leaf_order(rooted);
    // One sphere per distinct label.
    std::map<Coord, DiscreteSphere> spheres;
    for (const auto& e : order)
        if (!spheres.count(e.label)) spheres.emplace(e.label, enumerate_sphere(d, e.label, limits));

    std::vector<LatticePoint> placement(rooted.tree.vertices().size(),
                                        LatticePoint(static_cast<std::size_t>(d), 0));
    std::uint64_t emitted = 0;
    bool stop = false;

    auto recurse = [&](auto&& self, std::size_t edge_index) -> void {
        if (edge_index == order.size()) {
            ++emitted;
            if (!cb(static_cast<const std::vector<LatticePoint>&>(placement))) stop = true;
            return;
        }
        const auto& e = order[edge_index];
        const auto& sphere = spheres.at(e.label);
        const auto& base = placement[e.parent];
        auto& target = placement[e.child];
        const std::size_t n = sphere.size();
        for (std::size_t i = 0; i < n && !stop; ++i) {
            auto offset = sphere.point(i);
            for (int k = 0; k < d; ++k)
                target[static_cast<std::size_t>(k)] =
                    base[static_cast<std::size_t>(k)] + offset[static_cast<std::size_t>(k)];
            self(self, edge_index + 1);
        }
    };
    recurse(recurse, 0);
    return emitted;
}

/// Materialized immersion stream. Without a limit the expected count must
/// stay under the configured ceiling.
inline std::vector<Immersion> enumerate_immersions(const RootedTree& rooted, int d,
                                                   std::optional<std::uint64_t> limit = std::nullopt,
                                                   const Limits& limits = default_limits()) {
    if (!limit) {
        BigInt expected = count_immersions(rooted, d);
        if (expected > limits.max_immersions)
            throw ResourceLimitError("enumerate_immersions: count " + expected.str() +
                                     " exceeds ceiling " + std::to_string(limits.max_immersions) +
                                     "; pass a limit");
    }
    std::vector<Immersion> out;
    if (limit && *limit == 0) return out;
    for_each_immersion(rooted, d, [&](const std::vector<LatticePoint>& placement) {
        out.push_back(Immersion{placement});
        return !limit || out.size() < *limit;
    }, limits);
    return out;
}

/// Injectivity test on a raw placement vector (streaming counterpart of
/// is_embedding).
inline bool placement_injective(const std::vector<LatticePoint>& placement) {
    for (std::size_t i = 0; i < placement.size(); ++i)
        for (std::size_t j = i + 1; j < placement.size(); ++j)
            if (placement[i] == placement[j]) return false;
    return true;
}

}  // namespace latrec
