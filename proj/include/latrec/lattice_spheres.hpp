#pragma once

// Discrete spheres S_N = { x in Z^d : |x|^2 = N }: enumeration in canonical
// (lexicographic) order, exact counting via iterated convolution of the
// one-dimensional square-count sequence, and residue-class profiles mod M.

#include <algorithm>
#include <atomic>
#include <span>
#include <thread>
#include <vector>

#include "latrec/common.hpp"

namespace latrec {

struct DiscreteSphere {
    int dimension = 0;
    Coord radius_sq = 0;
    std::vector<Coord> flat;  // count*dimension coords, lexicographic point order

    std::size_t size() const {
        return dimension == 0 ? 0 : flat.size() / static_cast<std::size_t>(dimension);
    }
    std::span<const Coord> point(std::size_t i) const {
        return {flat.data() + i * static_cast<std::size_t>(dimension),
                static_cast<std::size_t>(dimension)};
    }
    LatticePoint point_vec(std::size_t i) const {
        auto p = point(i);
        return {p.begin(), p.end()};
    }
};

/// Pushforward of the counting measure on S_N to (Z_M)^d.
/// counts is indexed by the flat residue key sum_i r_i * M^i.
struct ResidueSphereProfile {
    int dimension = 0;
    Coord radius_sq = 0;
    Coord modulus = 1;
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;  // sum of counts == |S_N|

    std::int64_t count_at(std::span<const Coord> residue) const {
        std::size_t key = 0, stride = 1;
        for (int i = 0; i < dimension; ++i) {
            Coord r = ((residue[static_cast<std::size_t>(i)] % modulus) + modulus) % modulus;
            key += static_cast<std::size_t>(r) * stride;
            stride *= static_cast<std::size_t>(modulus);
        }
        return counts[key];
    }
};

// ---------------------------------------------------------------------------
// Counting backend
// ---------------------------------------------------------------------------

/// |S_n| for all n in [0, n_max], computed by convolving the 1-d square-count
/// sequence d times. Exact big-integer arithmetic: r_d(n) grows ~ n^{(d-2)/2}
/// and must not overflow silently.
inline std::vector<BigInt> sphere_size_table(int d, Coord n_max) {
    if (d < 1) throw ValidationError("sphere_size_table: dimension must be >= 1");
    if (n_max < 0) throw ValidationError("sphere_size_table: negative radius_sq");
    std::vector<BigInt> cur(static_cast<std::size_t>(n_max) + 1);
    for (Coord x = 0; x * x <= n_max; ++x) cur[static_cast<std::size_t>(x * x)] += (x == 0 ? 1 : 2);
    for (int j = 2; j <= d; ++j) {
        std::vector<BigInt> next(static_cast<std::size_t>(n_max) + 1);
        for (Coord n = 0; n <= n_max; ++n) {
            BigInt acc = cur[static_cast<std::size_t>(n)];  // x = 0 term
            for (Coord x = 1; x * x <= n; ++x)
                acc += 2 * cur[static_cast<std::size_t>(n - x * x)];
            next[static_cast<std::size_t>(n)] = std::move(acc);
        }
        cur = std::move(next);
    }
    return cur;
}

/// |S_N| without materializing points.
inline BigInt sphere_size(int d, Coord radius_sq) {
    return sphere_size_table(d, radius_sq)[static_cast<std::size_t>(radius_sq)];
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace detail {

// Depth-first descent over coordinates with remaining-budget pruning.
// Appends points (sharing the prefix in `scratch`) to `out` in lex order.
inline void descend_sphere(int d, int index, Coord rem, std::vector<Coord>& scratch,
                           std::vector<Coord>& out) {
    if (index == d - 1) {
        Coord r = isqrt(rem);
        if (r * r != rem) return;
        scratch[static_cast<std::size_t>(index)] = -r;
        out.insert(out.end(), scratch.begin(), scratch.end());
        if (r != 0) {
            scratch[static_cast<std::size_t>(index)] = r;
            out.insert(out.end(), scratch.begin(), scratch.end());
        }
        return;
    }
    Coord r = isqrt(rem);
    for (Coord x = -r; x <= r; ++x) {
        scratch[static_cast<std::size_t>(index)] = x;
        descend_sphere(d, index + 1, rem - x * x, scratch, out);
    }
}

}  // namespace detail

/// Complete set of integer solutions of |x|^2 = N in lexicographic order.
/// Fails with ResourceLimitError when |S_N| would exceed the point ceiling;
/// callers should fall back to sphere_size. threads > 1 splits the work over
/// first-coordinate branches; output order is identical for any thread count.
inline DiscreteSphere enumerate_sphere(int d, Coord radius_sq,
                                       const Limits& limits = default_limits(),
                                       unsigned threads = 1) {
    if (d < 1) throw ValidationError("enumerate_sphere: dimension must be >= 1");
    if (radius_sq < 0) throw ValidationError("enumerate_sphere: negative radius_sq");
    BigInt expected = sphere_size(d, radius_sq);
    if (expected > limits.max_sphere_points)
        throw ResourceLimitError("enumerate_sphere: |S_N| = " + expected.str() +
                                 " exceeds point ceiling " + std::to_string(limits.max_sphere_points) +
                                 "; use sphere_size instead");

    DiscreteSphere sphere;
    sphere.dimension = d;
    sphere.radius_sq = radius_sq;
    sphere.flat.reserve(expected.convert_to<std::size_t>() * static_cast<std::size_t>(d));

    Coord r = isqrt(radius_sq);
    if (d == 1) {
        std::vector<Coord> scratch(1);
        detail::descend_sphere(d, 0, radius_sq, scratch, sphere.flat);
        return sphere;
    }

    const Coord branches = 2 * r + 1;
    if (threads <= 1 || branches < 4) {
        std::vector<Coord> scratch(static_cast<std::size_t>(d));
        for (Coord x = -r; x <= r; ++x) {
            scratch[0] = x;
            detail::descend_sphere(d, 1, radius_sq - x * x, scratch, sphere.flat);
        }
        return sphere;
    }

    // One buffer per first-coordinate branch, concatenated in branch order.
    std::vector<std::vector<Coord>> buffers(static_cast<std::size_t>(branches));
    std::atomic<Coord> cursor{0};
    auto worker = [&]() {
        std::vector<Coord> scratch(static_cast<std::size_t>(d));
        for (;;) {
            Coord b = cursor.fetch_add(1);
            if (b >= branches) return;
            Coord x = b - r;
            scratch[0] = x;
            detail::descend_sphere(d, 1, radius_sq - x * x, scratch,
                                   buffers[static_cast<std::size_t>(b)]);
        }
    };
    unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(branches));
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& buf : buffers) sphere.flat.insert(sphere.flat.end(), buf.begin(), buf.end());
    return sphere;
}

// ---------------------------------------------------------------------------
// Residue profiles
// ---------------------------------------------------------------------------

/// counts[r] = |{ x in S_N : x == r mod M }|, by dynamic programming over
/// coordinates tracking (partial squared sum, partial residue key); never
/// enumerates the sphere.
inline ResidueSphereProfile residue_profile(int d, Coord radius_sq, Coord modulus,
                                            const Limits& limits = default_limits()) {
    if (d < 1) throw ValidationError("residue_profile: dimension must be >= 1");
    if (radius_sq < 0) throw ValidationError("residue_profile: negative radius_sq");
    if (modulus < 1) throw ValidationError("residue_profile: modulus must be >= 1");

    const auto m = static_cast<std::size_t>(modulus);
    double cells = 1.0;
    for (int i = 0; i < d; ++i) cells *= static_cast<double>(m);
    const double span = static_cast<double>(2 * isqrt(radius_sq) + 1);
    const double work = static_cast<double>(radius_sq + 1) * (cells / static_cast<double>(m)) *
                        span * static_cast<double>(d);
    if (cells > static_cast<double>(limits.max_profile_work) ||
        work > static_cast<double>(limits.max_profile_work))
        throw ResourceLimitError("residue_profile: DP work ~" + std::to_string(work) +
                                 " exceeds ceiling " + std::to_string(limits.max_profile_work));

    const auto budget = static_cast<std::size_t>(radius_sq) + 1;
    ResidueSphereProfile profile;
    profile.dimension = d;
    profile.radius_sq = radius_sq;
    profile.modulus = modulus;

    // dp[s * keys + key]: ways to fill the first j coordinates with squared
    // sum s and residue key `key` (little-endian mixed radix).
    std::size_t keys = 1;
    std::vector<std::int64_t> dp(budget, 0);
    dp[0] = 1;
    for (int j = 0; j + 1 < d; ++j) {
        std::size_t next_keys = keys * m;
        std::vector<std::int64_t> next(budget * next_keys, 0);
        for (std::size_t s = 0; s < budget; ++s) {
            Coord rem = radius_sq - static_cast<Coord>(s);
            Coord reach = isqrt(rem);
            for (std::size_t key = 0; key < keys; ++key) {
                std::int64_t v = dp[s * keys + key];
                if (v == 0) continue;
                for (Coord x = -reach; x <= reach; ++x) {
                    auto rho = static_cast<std::size_t>(((x % modulus) + modulus) % modulus);
                    std::size_t ns = s + static_cast<std::size_t>(x * x);
                    next[ns * next_keys + (key + rho * keys)] += v;
                }
            }
        }
        dp = std::move(next);
        keys = next_keys;
    }

    // Last coordinate must consume the remaining budget exactly.
    profile.counts.assign(keys * m, 0);
    for (std::size_t s = 0; s < budget; ++s) {
        Coord rem = radius_sq - static_cast<Coord>(s);
        Coord x = isqrt(rem);
        if (x * x != rem) continue;
        for (std::size_t key = 0; key < keys; ++key) {
            std::int64_t v = dp[s * keys + key];
            if (v == 0) continue;
            auto rho_pos = static_cast<std::size_t>(x % modulus);
            profile.counts[key + rho_pos * keys] += v;
            if (x != 0) {
                auto rho_neg = static_cast<std::size_t>(((-x % modulus) + modulus) % modulus);
                profile.counts[key + rho_neg * keys] += v;
            }
        }
    }
    for (auto c : profile.counts) profile.total += c;
    return profile;
}

}  // namespace latrec
