#pragma once

// Desk-scale combinatorics in finite windows of Z^d: squared-distance sets,
// arithmetic-progression coverage, and backtracking searches for chains with
// prescribed gaps and for locally isometrically embedded trees inside a
// dense subset.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "latrec/lattice_spheres.hpp"
#include "latrec/tree_model.hpp"

namespace latrec {

/// A finite subset of the window [0, L)^d.
class WindowSet {
public:
    WindowSet(int dimension, Coord side, std::vector<LatticePoint> points)
        : dimension_(dimension), side_(side), points_(std::move(points)) {
        if (dimension_ < 1) throw ValidationError("window: dimension must be >= 1");
        if (side_ < 1) throw ValidationError("window: side must be >= 1");
        for (const auto& p : points_) {
            if (static_cast<int>(p.size()) != dimension_)
                throw ValidationError("window: point dimension mismatch");
            for (Coord c : p)
                if (c < 0 || c >= side_)
                    throw ValidationError("window: point outside [0, L)^d");
        }
        std::sort(points_.begin(), points_.end());
        points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
    }

    int dimension() const { return dimension_; }
    Coord side() const { return side_; }
    const std::vector<LatticePoint>& points() const { return points_; }

    bool contains(const LatticePoint& p) const {
        return std::binary_search(points_.begin(), points_.end(), p);
    }

    double density() const {
        double cells = 1.0;
        for (int i = 0; i < dimension_; ++i) cells *= static_cast<double>(side_);
        return static_cast<double>(points_.size()) / cells;
    }

private:
    int dimension_;
    Coord side_;
    std::vector<LatticePoint> points_;  // sorted lex, unique
};

// ---------------------------------------------------------------------------
// Distance sets and AP coverage
// ---------------------------------------------------------------------------

struct SquaredDistanceSet {
    std::vector<Coord> values;  // distinct, sorted; contains 0 iff the set is nonempty
    bool includes_zero = false;
};

/// Exact set { |b1 - b2|^2 : b1, b2 in B }.
inline SquaredDistanceSet squared_distance_set(const WindowSet& B) {
    std::set<Coord> out;
    const auto& pts = B.points();
    if (!pts.empty()) out.insert(0);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            Coord norm = 0;
            for (int k = 0; k < B.dimension(); ++k) {
                Coord diff = pts[i][static_cast<std::size_t>(k)] - pts[j][static_cast<std::size_t>(k)];
                norm += diff * diff;
            }
            out.insert(norm);
        }
    SquaredDistanceSet result;
    result.includes_zero = !pts.empty();
    result.values.assign(out.begin(), out.end());
    return result;
}

struct CoverageReport {
    Coord q = 1;
    Coord lo = 0, hi = 0;
    std::vector<char> attained;        // attained[t - lo] for q*t
    std::uint64_t attained_count = 0;
    std::optional<Coord> full_suffix_from;  // smallest t0 with all of [t0, hi] attained
};

/// For each multiple q*t with lo <= t <= hi, reports whether q*t occurs in the
/// squared-distance set of B; the largest fully attained suffix is the
/// empirical N_0 for this window.
inline CoverageReport ap_coverage(const WindowSet& B, Coord q, Coord lo, Coord hi) {
    if (q < 1) throw ValidationError("ap_coverage: q must be >= 1");
    if (lo > hi) throw ValidationError("ap_coverage: empty range");
    auto dist = squared_distance_set(B);
    CoverageReport report;
    report.q = q;
    report.lo = lo;
    report.hi = hi;
    report.attained.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    for (Coord t = lo; t <= hi; ++t) {
        bool hit = std::binary_search(dist.values.begin(), dist.values.end(), q * t);
        report.attained[static_cast<std::size_t>(t - lo)] = hit ? 1 : 0;
        if (hit) ++report.attained_count;
    }
    for (Coord t = hi; t >= lo; --t) {
        if (!report.attained[static_cast<std::size_t>(t - lo)]) break;
        report.full_suffix_from = t;
        if (t == lo) break;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Chain search
// ---------------------------------------------------------------------------

struct ChainQuery {
    Coord q = 1;
    std::vector<Coord> gaps;  // t_1..t_m, all >= 1
};

enum class SearchStatus { Found, NotFound, BudgetExhausted };

struct ChainSearchReport {
    ChainQuery query;
    SearchStatus status = SearchStatus::NotFound;
    std::vector<LatticePoint> witness;  // m+1 points when found
    std::uint64_t nodes_explored = 0;
    std::uint64_t budget = 0;
};

namespace detail {

inline Coord squared_distance(const LatticePoint& a, const LatticePoint& b) {
    Coord norm = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Coord diff = a[i] - b[i];
        norm += diff * diff;
    }
    return norm;
}

}  // namespace detail

/// Every witness re-validates in integer arithmetic: distinct points with the
/// exact prescribed squared gaps.
inline bool validate_chain(const WindowSet& B, const ChainQuery& query,
                           const std::vector<LatticePoint>& chain) {
    if (chain.size() != query.gaps.size() + 1) return false;
    for (const auto& p : chain)
        if (!B.contains(p)) return false;
    for (std::size_t i = 0; i < chain.size(); ++i)
        for (std::size_t j = i + 1; j < chain.size(); ++j)
            if (chain[i] == chain[j]) return false;
    for (std::size_t i = 0; i < query.gaps.size(); ++i)
        if (detail::squared_distance(chain[i], chain[i + 1]) != query.q * query.gaps[i]) return false;
    return true;
}

/// Backtracking search for distinct b_1..b_{m+1} in B with
/// |b_i - b_{i+1}|^2 = q * t_i. Base points in lexicographic order, sphere
/// offsets in canonical order; the budget caps visited partial chains
/// (BudgetExhausted is distinct from an exhaustive NotFound).
inline ChainSearchReport find_chain(const WindowSet& B, const ChainQuery& query,
                                    std::uint64_t budget,
                                    const Limits& limits = default_limits()) {
    if (query.q < 1) throw ValidationError("find_chain: q must be >= 1");
    if (query.gaps.empty()) throw ValidationError("find_chain: empty gap list");
    for (Coord t : query.gaps)
        if (t < 1) throw ValidationError("find_chain: gaps must be >= 1");

    ChainSearchReport report;
    report.query = query;
    report.budget = budget;

    std::map<Coord, DiscreteSphere> spheres;
    for (Coord t : query.gaps) {
        Coord key = query.q * t;
        if (!spheres.count(key)) spheres.emplace(key, enumerate_sphere(B.dimension(), key, limits));
    }

    std::vector<LatticePoint> chain;
    chain.reserve(query.gaps.size() + 1);
    bool out_of_budget = false;

    auto extend = [&](auto&& self) -> bool {
        if (report.nodes_explored >= budget) {
            out_of_budget = true;
            return false;
        }
        ++report.nodes_explored;
        if (chain.size() == query.gaps.size() + 1) return true;
        const auto& sphere = spheres.at(query.q * query.gaps[chain.size() - 1]);
        const auto& tail = chain.back();
        LatticePoint candidate(static_cast<std::size_t>(B.dimension()));
        const std::size_t n = sphere.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto offset = sphere.point(i);
            bool in_window = true;
            for (int k = 0; k < B.dimension(); ++k) {
                candidate[static_cast<std::size_t>(k)] =
                    tail[static_cast<std::size_t>(k)] + offset[static_cast<std::size_t>(k)];
                if (candidate[static_cast<std::size_t>(k)] < 0 ||
                    candidate[static_cast<std::size_t>(k)] >= B.side()) {
                    in_window = false;
                    break;
                }
            }
            if (!in_window || !B.contains(candidate)) continue;
            if (std::find(chain.begin(), chain.end(), candidate) != chain.end()) continue;
            chain.push_back(candidate);
            if (self(self)) return true;
            chain.pop_back();
            if (out_of_budget) return false;
        }
        return false;
    };

    for (const auto& base : B.points()) {
        chain.assign(1, base);
        if (extend(extend)) {
            if (!validate_chain(B, query, chain))
                throw Error("find_chain: internal witness validation failed");
            report.status = SearchStatus::Found;
            report.witness = chain;
            return report;
        }
        if (out_of_budget) {
            report.status = SearchStatus::BudgetExhausted;
            return report;
        }
    }
    report.status = SearchStatus::NotFound;
    return report;
}

// ---------------------------------------------------------------------------
// Tree embedding search
// ---------------------------------------------------------------------------

struct TreeSearchReport {
    Coord q = 1;
    SearchStatus status = SearchStatus::NotFound;
    LatticePoint base;        // b with q*iota(V) subset of B - b
    Immersion witness;        // placements aligned with tree vertices, root at 0
    std::uint64_t nodes_explored = 0;
    std::uint64_t budget = 0;
};

inline bool validate_tree_witness(const WindowSet& B, const RootedTree& rooted, Coord q,
                                  const LatticePoint& base, const Immersion& witness) {
    if (!validate_immersion(rooted, B.dimension(), witness)) return false;
    if (!is_embedding(witness)) return false;
    for (const auto& iota : witness.placement) {
        LatticePoint target(static_cast<std::size_t>(B.dimension()));
        for (int k = 0; k < B.dimension(); ++k)
            target[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + q * iota[static_cast<std::size_t>(k)];
        if (!B.contains(target)) return false;
    }
    return true;
}

/// For each base b in B (lex order), depth-first search along leaf_order for
/// an injective placement iota with b + q*iota(v) in B for every vertex.
inline TreeSearchReport find_tree_embedding(const WindowSet& B, const RootedTree& rooted, Coord q,
                                            std::uint64_t budget,
                                            const Limits& limits = default_limits()) {
    if (q < 1) throw ValidationError("find_tree_embedding: q must be >= 1");
    TreeSearchReport report;
    report.q = q;
    report.budget = budget;

    auto order = leaf_order(rooted);
    std::map<Coord, DiscreteSphere> spheres;
    for (const auto& e : order)
        if (!spheres.count(e.label))
            spheres.emplace(e.label, enumerate_sphere(B.dimension(), e.label, limits));

    const int d = B.dimension();
    std::vector<LatticePoint> placement(rooted.tree.vertices().size(),
                                        LatticePoint(static_cast<std::size_t>(d), 0));
    const LatticePoint* base_pt = nullptr;
    bool out_of_budget = false;

    auto placed_in_b = [&](const LatticePoint& iota) {
        LatticePoint target(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            target[static_cast<std::size_t>(k)] =
                (*base_pt)[static_cast<std::size_t>(k)] + q * iota[static_cast<std::size_t>(k)];
            if (target[static_cast<std::size_t>(k)] < 0 || target[static_cast<std::size_t>(k)] >= B.side())
                return false;
        }
        return B.contains(target);
    };

    auto search = [&](auto&& self, std::size_t edge_index) -> bool {
        if (report.nodes_explored >= budget) {
            out_of_budget = true;
            return false;
        }
        ++report.nodes_explored;
        if (edge_index == order.size()) return true;
        const auto& e = order[edge_index];
        const auto& sphere = spheres.at(e.label);
        const auto& parent = placement[e.parent];
        auto& child = placement[e.child];
        const std::size_t n = sphere.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto offset = sphere.point(i);
            for (int k = 0; k < d; ++k)
                child[static_cast<std::size_t>(k)] =
                    parent[static_cast<std::size_t>(k)] + offset[static_cast<std::size_t>(k)];
            if (!placed_in_b(child)) continue;
            // injectivity against the placed prefix: the root plus the child
            // vertices of all earlier edges
            bool duplicate = placement[rooted.root_index] == child;
            for (std::size_t pe = 0; pe < edge_index && !duplicate; ++pe)
                if (placement[order[pe].child] == child) duplicate = true;
            if (duplicate) continue;
            if (self(self, edge_index + 1)) return true;
            if (out_of_budget) return false;
        }
        return false;
    };

    for (const auto& b : B.points()) {
        base_pt = &b;
        for (auto& p : placement) std::fill(p.begin(), p.end(), 0);
        // the root maps to b itself, which is in B by construction
        if (search(search, 0)) {
            report.base = b;
            report.witness = Immersion{placement};
            if (!validate_tree_witness(B, rooted, q, report.base, report.witness))
                throw Error("find_tree_embedding: internal witness validation failed");
            report.status = SearchStatus::Found;
            return report;
        }
        if (out_of_budget) {
            report.status = SearchStatus::BudgetExhausted;
            return report;
        }
    }
    report.status = SearchStatus::NotFound;
    return report;
}

// ---------------------------------------------------------------------------
// Window generation
// ---------------------------------------------------------------------------

/// Deterministic Bernoulli window: each lattice point of [0, L)^d is kept
/// with probability `density`.
inline WindowSet generate_uniform_window(int d, Coord side, double density, std::uint64_t seed) {
    if (density < 0.0 || density > 1.0)
        throw ValidationError("generate_uniform_window: density must be in [0,1]");
    double cells = 1.0;
    for (int i = 0; i < d; ++i) cells *= static_cast<double>(side);
    if (cells > 5e7) throw ResourceLimitError("generate_uniform_window: window too large");
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(d)));
    std::vector<LatticePoint> pts;
    LatticePoint p(static_cast<std::size_t>(d), 0);
    for (;;) {
        if (rng.next_unit() < density) pts.push_back(p);
        int i = 0;
        for (; i < d; ++i) {
            if (++p[static_cast<std::size_t>(i)] < side) break;
            p[static_cast<std::size_t>(i)] = 0;
        }
        if (i == d) break;
    }
    return WindowSet(d, side, std::move(pts));
}

/// All window points x with (x mod g) in `residues`.
inline WindowSet generate_congruence_window(int d, Coord side, Coord g,
                                            const std::vector<LatticePoint>& residues) {
    if (g < 1) throw ValidationError("generate_congruence_window: gap must be >= 1");
    std::set<LatticePoint> wanted;
    for (const auto& r : residues) {
        if (static_cast<int>(r.size()) != d)
            throw ValidationError("generate_congruence_window: residue dimension mismatch");
        LatticePoint canon(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            canon[static_cast<std::size_t>(i)] = ((r[static_cast<std::size_t>(i)] % g) + g) % g;
        wanted.insert(canon);
    }
    std::vector<LatticePoint> pts;
    LatticePoint p(static_cast<std::size_t>(d), 0), residue(static_cast<std::size_t>(d));
    for (;;) {
        for (int i = 0; i < d; ++i) residue[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] % g;
        if (wanted.count(residue)) pts.push_back(p);
        int i = 0;
        for (; i < d; ++i) {
            if (++p[static_cast<std::size_t>(i)] < side) break;
            p[static_cast<std::size_t>(i)] = 0;
        }
        if (i == d) break;
    }
    return WindowSet(d, side, std::move(pts));
}

struct PlantedWindow {
    WindowSet window;
    std::vector<LatticePoint> witness;  // echoed planted points
};

/// Witness points (which must fit inside the window) plus Bernoulli noise.
inline PlantedWindow generate_planted_window(int d, Coord side,
                                             const std::vector<LatticePoint>& witness,
                                             double noise_density, std::uint64_t seed) {
    for (const auto& p : witness) {
        if (static_cast<int>(p.size()) != d)
            throw ValidationError("generate_planted_window: witness dimension mismatch");
        for (Coord c : p)
            if (c < 0 || c >= side)
                throw ValidationError("generate_planted_window: witness point outside the window");
    }
    WindowSet noise = generate_uniform_window(d, side, noise_density, seed);
    std::vector<LatticePoint> pts = noise.points();
    pts.insert(pts.end(), witness.begin(), witness.end());
    return {WindowSet(d, side, std::move(pts)), witness};
}

}  // namespace latrec
