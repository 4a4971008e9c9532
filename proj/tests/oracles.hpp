#pragma once

// Brute-force reference implementations used only by tests. Each oracle is
// deliberately written as a plain exhaustive loop, independent of the
// library's algorithmic path for the same quantity.

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "latrec/common.hpp"

namespace oracle {

using latrec::Coord;
using latrec::LatticePoint;

/// All x in [-limit, limit]^d with |x|^2 == radius_sq, by an odometer loop
/// over the full box.
inline std::vector<LatticePoint> box_sphere(int d, Coord radius_sq) {
    Coord limit = 0;
    while (limit * limit < radius_sq) ++limit;
    std::vector<LatticePoint> out;
    LatticePoint x(static_cast<std::size_t>(d), -limit);
    for (;;) {
        Coord norm = 0;
        for (Coord c : x) norm += c * c;
        if (norm == radius_sq) out.push_back(x);
        int i = 0;
        for (; i < d; ++i) {
            if (++x[static_cast<std::size_t>(i)] <= limit) break;
            x[static_cast<std::size_t>(i)] = -limit;
        }
        if (i == d) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Counts |S_n| for all n <= n_max in one pass over the box [-L, L]^d.
inline std::vector<std::int64_t> box_sphere_counts(int d, Coord n_max) {
    Coord limit = 0;
    while (limit * limit < n_max) ++limit;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(n_max) + 1, 0);
    LatticePoint x(static_cast<std::size_t>(d), -limit);
    for (;;) {
        Coord norm = 0;
        for (Coord c : x) norm += c * c;
        if (norm <= n_max) ++counts[static_cast<std::size_t>(norm)];
        int i = 0;
        for (; i < d; ++i) {
            if (++x[static_cast<std::size_t>(i)] <= limit) break;
            x[static_cast<std::size_t>(i)] = -limit;
        }
        if (i == d) break;
    }
    return counts;
}

/// Pairwise squared distances, including 0 for a nonempty set.
inline std::set<Coord> pairwise_distances(const std::vector<LatticePoint>& pts) {
    std::set<Coord> out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i; j < pts.size(); ++j) {
            Coord norm = 0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) {
                Coord diff = pts[i][k] - pts[j][k];
                norm += diff * diff;
            }
            out.insert(norm);
        }
    return out;
}

inline Coord squared_distance(const LatticePoint& a, const LatticePoint& b) {
    Coord norm = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        Coord diff = a[k] - b[k];
        norm += diff * diff;
    }
    return norm;
}

/// Exhaustive chain search over all (m+1)-tuples of distinct points.
inline bool chain_exists(const std::vector<LatticePoint>& pts, Coord q,
                         const std::vector<Coord>& gaps) {
    const std::size_t m = gaps.size();
    std::vector<std::size_t> pick(m + 1, 0);
    if (pts.empty()) return false;
    for (;;) {
        bool ok = true;
        for (std::size_t i = 0; i <= m && ok; ++i)
            for (std::size_t j = i + 1; j <= m && ok; ++j)
                if (pick[i] == pick[j]) ok = false;
        for (std::size_t i = 0; i < m && ok; ++i)
            if (squared_distance(pts[pick[i]], pts[pick[i + 1]]) != q * gaps[i]) ok = false;
        if (ok) return true;
        std::size_t i = 0;
        for (; i <= m; ++i) {
            if (++pick[i] < pts.size()) break;
            pick[i] = 0;
        }
        if (i == m + 1) return false;
    }
}

}  // namespace oracle
