#pragma once

// Normalized exponential sums over discrete spheres, the q_{eta,C} = lcm
// construction, major/minor arc classification (exact, via dyadic rational
// arithmetic), and seeded minor-arc scans probing the sum-decay bound.

#include <optional>
#include <string>
#include <vector>

#include "latrec/lattice_spheres.hpp"

namespace latrec {

/// A frequency vector on the torus; every coordinate is reduced to [0, 1).
class Frequency {
public:
    Frequency() = default;
    explicit Frequency(std::vector<double> coords) : coords_(std::move(coords)) {
        for (auto& c : coords_) {
            c -= std::floor(c);
            if (c >= 1.0) c = 0.0;  // guard: rounding of (x - floor x) can hit 1.0
        }
    }
    static Frequency zero(int d) { return Frequency(std::vector<double>(static_cast<std::size_t>(d), 0.0)); }

    int dimension() const { return static_cast<int>(coords_.size()); }
    const std::vector<double>& coords() const { return coords_; }
    double operator[](std::size_t i) const { return coords_[i]; }

    Frequency negated() const {
        std::vector<double> c(coords_.size());
        for (std::size_t i = 0; i < coords_.size(); ++i) c[i] = -coords_[i];
        return Frequency(std::move(c));
    }

private:
    std::vector<double> coords_;
};

// ---------------------------------------------------------------------------
// q_{eta,C}
// ---------------------------------------------------------------------------

/// Exact lcm(1..k).
inline BigInt lcm_up_to(std::int64_t k) {
    if (k < 1) throw ValidationError("lcm_up_to: k must be >= 1");
    BigInt q = 1;
    for (std::int64_t i = 2; i <= k; ++i) q = q / boost::multiprecision::gcd(q, BigInt(i)) * i;
    return q;
}

struct ArcParameters {
    double eta = 0.0;
    double C = 0.0;
    Coord N = 0;
    std::int64_t lcm_bound = 0;  // floor(C * eta^-2)
    BigInt q = 1;                // lcm(1..lcm_bound); 1 when the range is empty
    double width = 0.0;          // (eta * N)^{-1/2}
};

inline ArcParameters make_arc_parameters(double eta, double C, Coord N) {
    if (!(eta > 0.0)) throw ValidationError("arc parameters: eta must be > 0");
    if (!(C > 0.0)) throw ValidationError("arc parameters: C must be > 0");
    if (N < 1) throw ValidationError("arc parameters: N must be >= 1");
    ArcParameters p;
    p.eta = eta;
    p.C = C;
    p.N = N;
    double bound = std::floor(C / (eta * eta));
    if (bound > 2e5)
        throw ResourceLimitError("arc parameters: lcm bound " + std::to_string(bound) +
                                 " too large; q would have ~" + std::to_string(bound / 2.3) +
                                 " digits");
    p.lcm_bound = bound < 1.0 ? 0 : static_cast<std::int64_t>(bound);
    p.q = p.lcm_bound <= 1 ? BigInt(1) : lcm_up_to(p.lcm_bound);
    p.width = 1.0 / std::sqrt(eta * static_cast<double>(N));
    return p;
}

// ---------------------------------------------------------------------------
// Arc classification
// ---------------------------------------------------------------------------

enum class ArcClass { Major, Minor };

namespace detail {

// dist(theta, (1/q)Z) <= width on the circle, decided exactly: theta and
// width are dyadic rationals, so the comparison reduces to integers.
inline bool near_grid(double theta, const BigInt& q, double width) {
    Dyadic t = to_dyadic(theta);  // theta in [0,1) => num >= 0, exp2 <= 0
    Dyadic w = to_dyadic(width);
    if (w.num < 0) return false;
    int s = -t.exp2;
    if (t.num < 0) throw ValidationError("near_grid: frequency not normalized");
    BigInt scaled = t.num * q;           // q*theta = scaled / 2^s
    BigInt pow = BigInt(1) << s;
    BigInt rem = scaled % pow;           // frac(q*theta) = rem / 2^s
    BigInt wrapped = pow - rem;
    BigInt cmod = rem < wrapped ? rem : wrapped;
    // cmod / (2^s * q) <= w.num * 2^{w.exp2}
    int shift = w.exp2 + s;
    BigInt lhs = cmod;
    BigInt rhs = w.num * q;
    if (shift >= 0)
        rhs <<= shift;
    else
        lhs <<= -shift;
    return lhs <= rhs;
}

}  // namespace detail

/// Major iff every coordinate is within `width` (circle distance) of a
/// multiple of 1/q.
inline ArcClass classify_arc(const Frequency& theta, const ArcParameters& params) {
    for (int i = 0; i < theta.dimension(); ++i)
        if (!detail::near_grid(theta[static_cast<std::size_t>(i)], params.q, params.width))
            return ArcClass::Minor;
    return ArcClass::Major;
}

// ---------------------------------------------------------------------------
// Exponential sums
// ---------------------------------------------------------------------------

/// (1/|S_N|) sum over x in S_N of exp(2*pi*i*<x, theta>).
/// Phase is reduced mod 1 before the trig call, so the exact cases
/// (theta = 0, theta = (1/2,...)) come out to 1 resp. (-1)^N to ~1e-15.
inline Complex exp_sum(const DiscreteSphere& sphere, const Frequency& theta) {
    if (sphere.size() == 0)
        throw EmptySphereError("exp_sum: empty sphere (d=" + std::to_string(sphere.dimension) +
                               ", N=" + std::to_string(sphere.radius_sq) + ")");
    if (theta.dimension() != sphere.dimension)
        throw ValidationError("exp_sum: frequency dimension mismatch");
    const int d = sphere.dimension;
    NeumaierSum re, im;
    const std::size_t n = sphere.size();
    for (std::size_t i = 0; i < n; ++i) {
        auto p = sphere.point(i);
        double phase = 0.0;
        for (int k = 0; k < d; ++k)
            phase += static_cast<double>(p[static_cast<std::size_t>(k)]) * theta[static_cast<std::size_t>(k)];
        phase -= std::nearbyint(phase);
        re.add(std::cos(kTau * phase));
        im.add(std::sin(kTau * phase));
    }
    auto count = static_cast<double>(n);
    return {re.value() / count, im.value() / count};
}

/// Same quantity computed without materializing the sphere: the sum factors
/// through the coordinate-wise generating polynomials
///   f_i(z) = 1 + sum_{x>=1} 2*cos(2*pi*theta_i*x) z^{x^2},
/// and the answer is [z^N] of their product (real: spheres are symmetric
/// under negation). Cost O(d * N^{3/2}); used by the minor-arc scans.
inline double exp_sum_by_radius_unnormalized(int d, Coord N, const Frequency& theta) {
    if (theta.dimension() != d) throw ValidationError("exp_sum_by_radius: dimension mismatch");
    if (N < 0) throw ValidationError("exp_sum_by_radius: negative radius_sq");
    const auto budget = static_cast<std::size_t>(N) + 1;
    Coord reach = isqrt(N);
    std::vector<double> weights(static_cast<std::size_t>(reach) + 1);
    std::vector<double> cur(budget, 0.0), next(budget);
    for (int i = 0; i < d; ++i) {
        weights[0] = 1.0;
        for (Coord x = 1; x <= reach; ++x)
            weights[static_cast<std::size_t>(x)] =
                2.0 * std::cos(kTau * theta[static_cast<std::size_t>(i)] * static_cast<double>(x));
        if (i == 0) {
            std::fill(cur.begin(), cur.end(), 0.0);
            for (Coord x = 0; x <= reach; ++x)
                cur[static_cast<std::size_t>(x * x)] = weights[static_cast<std::size_t>(x)];
            continue;
        }
        for (std::size_t n = 0; n < budget; ++n) {
            double acc = cur[n];  // x = 0
            for (Coord x = 1; x * x <= static_cast<Coord>(n); ++x)
                acc += weights[static_cast<std::size_t>(x)] * cur[n - static_cast<std::size_t>(x * x)];
            next[n] = acc;
        }
        cur.swap(next);
    }
    return cur[static_cast<std::size_t>(N)];
}

// ---------------------------------------------------------------------------
// Minor-arc scans
// ---------------------------------------------------------------------------

struct ScanReport {
    int dimension = 0;
    double eta = 0.0;
    double C = 0.0;
    Coord N = 0;
    std::uint64_t seed = 0;
    std::int64_t lcm_bound = 0;
    BigInt q = 1;
    double width = 0.0;
    std::uint64_t requested_samples = 0;
    std::uint64_t rejected_major = 0;
    std::uint64_t evaluated_minor = 0;
    std::uint64_t violations = 0;           // |sum| > eta among minor samples
    double violation_fraction = 0.0;        // violations / evaluated_minor
    std::optional<double> max_modulus;      // absent when no minor sample was drawn
    std::vector<double> argmax_theta;
    bool empty_sphere = false;
    std::vector<std::string> warnings;
};

/// Draws sample_count frequencies uniformly on the torus, rejects major-arc
/// points, and evaluates the normalized exponential sum on the rest.
/// Deterministic given (seed, parameters); thread count never matters.
inline ScanReport scan_minor_arcs(int d, double eta, double C, Coord N,
                                  std::uint64_t sample_count, std::uint64_t seed) {
    if (d < 1) throw ValidationError("scan_minor_arcs: dimension must be >= 1");
    ArcParameters params = make_arc_parameters(eta, C, N);
    ScanReport report;
    report.dimension = d;
    report.eta = eta;
    report.C = C;
    report.N = N;
    report.seed = seed;
    report.lcm_bound = params.lcm_bound;
    report.q = params.q;
    report.width = params.width;
    report.requested_samples = sample_count;

    if (static_cast<double>(N) < C / (eta * eta * eta * eta)) {
        report.warnings.push_back("N below C*eta^-4; the bound is not asserted here");
    }
    BigInt size = sphere_size(d, N);
    if (size == 0) {
        report.empty_sphere = true;
        report.warnings.push_back("empty sphere: no points with |x|^2 = N; scan skipped");
        return report;
    }
    const double norm = to_double(size);

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(N)));
    std::vector<double> coords(static_cast<std::size_t>(d));
    for (std::uint64_t s = 0; s < sample_count; ++s) {
        for (auto& c : coords) c = rng.next_unit();
        Frequency theta{coords};
        if (classify_arc(theta, params) == ArcClass::Major) {
            ++report.rejected_major;
            continue;
        }
        ++report.evaluated_minor;
        double value = exp_sum_by_radius_unnormalized(d, N, theta) / norm;
        double modulus = std::abs(value);
        if (modulus > eta) ++report.violations;
        if (!report.max_modulus || modulus > *report.max_modulus) {
            report.max_modulus = modulus;
            report.argmax_theta = theta.coords();
        }
    }
    if (report.evaluated_minor > 0)
        report.violation_fraction =
            static_cast<double>(report.violations) / static_cast<double>(report.evaluated_minor);
    return report;
}

// ---------------------------------------------------------------------------
// Empirical constant search
// ---------------------------------------------------------------------------

struct EstimateCandidate {
    double C = 0.0;
    Coord n_threshold = 0;      // ceil(C * eta^-4)
    bool applicable = false;    // some N in range reached the threshold
    std::uint64_t scanned_n = 0;
    std::uint64_t minor_samples = 0;
    std::uint64_t violations = 0;
    Coord first_violation_n = -1;
    bool passed = false;
};

struct EstimateReport {
    int dimension = 0;
    double eta = 0.0;
    Coord n_lo = 0, n_hi = 0, n_stride = 1;
    std::uint64_t sample_count = 0;
    std::uint64_t seed = 0;
    std::vector<EstimateCandidate> candidates;
    bool found = false;
    double chosen_C = 0.0;
};

/// Smallest C in the ascending grid whose minor-arc scans report no violation
/// over the N range. Ns below a candidate's own threshold C*eta^-4 are not
/// scanned for it (the bound is silent there); a candidate with no applicable
/// N cannot pass. Scans stop early at the first violation.
inline EstimateReport estimate_constant(int d, double eta, Coord n_lo, Coord n_hi, Coord n_stride,
                                        const std::vector<double>& grid_C,
                                        std::uint64_t sample_count, std::uint64_t seed) {
    if (grid_C.empty()) throw ValidationError("estimate_constant: empty C grid");
    if (!std::is_sorted(grid_C.begin(), grid_C.end()))
        throw ValidationError("estimate_constant: C grid must be ascending");
    if (n_stride < 1) throw ValidationError("estimate_constant: stride must be >= 1");
    if (n_lo > n_hi) throw ValidationError("estimate_constant: empty N range");

    EstimateReport report;
    report.dimension = d;
    report.eta = eta;
    report.n_lo = n_lo;
    report.n_hi = n_hi;
    report.n_stride = n_stride;
    report.sample_count = sample_count;
    report.seed = seed;

    for (double C : grid_C) {
        EstimateCandidate cand;
        cand.C = C;
        cand.n_threshold = static_cast<Coord>(std::ceil(C / (eta * eta * eta * eta)));
        Coord start = std::max(n_lo, cand.n_threshold);
        for (Coord N = start; N <= n_hi; N += n_stride) {
            ScanReport scan = scan_minor_arcs(d, eta, C, N, sample_count,
                                              derive_seed(seed, static_cast<std::uint64_t>(N),
                                                          static_cast<std::uint64_t>(cand.n_threshold)));
            if (scan.empty_sphere) continue;
            cand.applicable = true;
            ++cand.scanned_n;
            cand.minor_samples += scan.evaluated_minor;
            cand.violations += scan.violations;
            if (scan.violations > 0) {
                cand.first_violation_n = N;
                break;
            }
        }
        cand.passed = cand.applicable && cand.violations == 0;
        report.candidates.push_back(cand);
        if (cand.passed && !report.found) {
            report.found = true;
            report.chosen_C = C;
            break;
        }
    }
    return report;
}

}  // namespace latrec
