#pragma once

// Ergodic machinery on finite torus systems: Z^d acts on X = (Z_M)^d by
// translation with uniform measure. Every Birkhoff limit is a coset density,
// every projection is a character sum, and every recurrence quantity is a
// finite computation, so limit statements become exact identities and
// inequality certificates.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latrec/exponential_sums.hpp"
#include "latrec/lattice_spheres.hpp"
#include "latrec/tree_model.hpp"

namespace latrec {

// ---------------------------------------------------------------------------
// Systems, sets, components
// ---------------------------------------------------------------------------

struct TorusSystem {
    Coord modulus = 1;
    int dimension = 1;
    std::size_t cells = 1;  // modulus^dimension

    TorusSystem(Coord M, int d, const Limits& limits = default_limits())
        : modulus(M), dimension(d) {
        if (M < 1) throw ValidationError("torus system: modulus must be >= 1");
        if (d < 1) throw ValidationError("torus system: dimension must be >= 1");
        double size = 1.0;
        for (int i = 0; i < d; ++i) size *= static_cast<double>(M);
        if (size > static_cast<double>(limits.max_torus_cells))
            throw ResourceLimitError("torus system: M^d = " + std::to_string(size) +
                                     " exceeds cell ceiling");
        cells = 1;
        for (int i = 0; i < d; ++i) cells *= static_cast<std::size_t>(M);
    }

    bool operator==(const TorusSystem& o) const {
        return modulus == o.modulus && dimension == o.dimension;
    }

    std::size_t index_of(std::span<const Coord> x) const {
        std::size_t idx = 0, stride = 1;
        for (int i = 0; i < dimension; ++i) {
            Coord r = ((x[static_cast<std::size_t>(i)] % modulus) + modulus) % modulus;
            idx += static_cast<std::size_t>(r) * stride;
            stride *= static_cast<std::size_t>(modulus);
        }
        return idx;
    }

    LatticePoint point_of(std::size_t idx) const {
        LatticePoint x(static_cast<std::size_t>(dimension));
        for (int i = 0; i < dimension; ++i) {
            x[static_cast<std::size_t>(i)] = static_cast<Coord>(idx % static_cast<std::size_t>(modulus));
            idx /= static_cast<std::size_t>(modulus);
        }
        return x;
    }
};

struct MeasurableSet {
    TorusSystem system;
    std::vector<std::uint8_t> mask;  // one byte per cell, 0/1

    explicit MeasurableSet(const TorusSystem& sys) : system(sys), mask(sys.cells, 0) {}

    static MeasurableSet empty_set(const TorusSystem& sys) { return MeasurableSet(sys); }

    static MeasurableSet full_set(const TorusSystem& sys) {
        MeasurableSet b(sys);
        std::fill(b.mask.begin(), b.mask.end(), 1);
        return b;
    }

    static MeasurableSet from_points(const TorusSystem& sys, const std::vector<LatticePoint>& pts) {
        MeasurableSet b(sys);
        for (const auto& p : pts) {
            if (static_cast<int>(p.size()) != sys.dimension)
                throw ValidationError("measurable set: point dimension mismatch");
            b.mask[sys.index_of(p)] = 1;
        }
        return b;
    }

    /// All x with (x mod g) in `residues`; g must divide M for the congruence
    /// to be well defined on Z_M.
    static MeasurableSet from_congruence(const TorusSystem& sys, Coord g,
                                         const std::vector<LatticePoint>& residues) {
        if (g < 1 || sys.modulus % g != 0)
            throw ValidationError("measurable set: congruence gap must divide the modulus");
        MeasurableSet b(sys);
        std::size_t gpow = 1;
        for (int i = 0; i < sys.dimension; ++i) gpow *= static_cast<std::size_t>(g);
        std::vector<char> wanted(gpow, 0);
        for (const auto& r : residues) {
            if (static_cast<int>(r.size()) != sys.dimension)
                throw ValidationError("measurable set: residue dimension mismatch");
            std::size_t key = 0, stride = 1;
            for (int i = 0; i < sys.dimension; ++i) {
                Coord c = ((r[static_cast<std::size_t>(i)] % g) + g) % g;
                key += static_cast<std::size_t>(c) * stride;
                stride *= static_cast<std::size_t>(g);
            }
            wanted[key] = 1;
        }
        for (std::size_t idx = 0; idx < sys.cells; ++idx) {
            auto x = sys.point_of(idx);
            std::size_t key = 0, stride = 1;
            for (int i = 0; i < sys.dimension; ++i) {
                key += static_cast<std::size_t>(x[static_cast<std::size_t>(i)] % g) * stride;
                stride *= static_cast<std::size_t>(g);
            }
            if (wanted[key]) b.mask[idx] = 1;
        }
        return b;
    }

    static MeasurableSet random_set(const TorusSystem& sys, double density, std::uint64_t seed) {
        if (density < 0.0 || density > 1.0)
            throw ValidationError("measurable set: density must be in [0,1]");
        MeasurableSet b(sys);
        Rng rng(derive_seed(seed, 0x7045, sys.cells));
        for (auto& bit : b.mask) bit = rng.next_unit() < density ? 1 : 0;
        return b;
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (auto b : mask) n += b;
        return n;
    }
    double measure() const {
        return static_cast<double>(popcount()) / static_cast<double>(system.cells);
    }
    std::vector<double> indicator() const {
        return {mask.begin(), mask.end()};
    }
};

/// One T^Q-ergodic component: the coset base + (g Z_M)^d with g = gcd(Q, M).
struct Component {
    Coord modulus = 1;
    int dimension = 1;
    Coord gap = 1;          // divides modulus
    LatticePoint base;      // coords in [0, gap)

    bool contains(std::span<const Coord> x) const {
        for (int i = 0; i < dimension; ++i) {
            Coord r = ((x[static_cast<std::size_t>(i)] % modulus) + modulus) % modulus;
            if (r % gap != base[static_cast<std::size_t>(i)]) return false;
        }
        return true;
    }

    double measure() const {
        double m = 1.0;
        for (int i = 0; i < dimension; ++i) m /= static_cast<double>(gap);
        return m;
    }

    std::size_t cell_count(const TorusSystem& sys) const {
        std::size_t n = 1;
        for (int i = 0; i < dimension; ++i) n *= static_cast<std::size_t>(sys.modulus / gap);
        return n;
    }
};

namespace detail {

inline std::size_t pow_size(Coord base, int exp) {
    std::size_t n = 1;
    for (int i = 0; i < exp; ++i) n *= static_cast<std::size_t>(base);
    return n;
}

/// Key of (x mod g) in mixed radix g, looping over cells of B once.
inline std::vector<std::int64_t> coset_counts(const MeasurableSet& B, Coord g) {
    const auto& sys = B.system;
    std::vector<std::int64_t> counts(pow_size(g, sys.dimension), 0);
    std::vector<Coord> digits(static_cast<std::size_t>(sys.dimension), 0);
    std::size_t key = 0;
    std::vector<std::size_t> key_stride(static_cast<std::size_t>(sys.dimension));
    std::size_t s = 1;
    for (int i = 0; i < sys.dimension; ++i) {
        key_stride[static_cast<std::size_t>(i)] = s;
        s *= static_cast<std::size_t>(g);
    }
    for (std::size_t idx = 0; idx < sys.cells; ++idx) {
        if (B.mask[idx]) counts[key] += 1;
        // advance digit counter and key = sum (digit_i mod g) * g^i
        for (int i = 0; i < sys.dimension; ++i) {
            auto& di = digits[static_cast<std::size_t>(i)];
            std::size_t ks = key_stride[static_cast<std::size_t>(i)];
            ++di;
            if (di % g == 0) key -= static_cast<std::size_t>(g - 1) * ks;
            else key += ks;
            if (di < sys.modulus) break;
            di = 0;
            // di wrapped M -> 0; key contribution for this digit is already 0
            // because M % g == 0 when g | M (validated by callers)
        }
    }
    return counts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Invariant projections and torsion spectra
// ---------------------------------------------------------------------------

/// P_{T^q} 1_B: the density of B on x + (g Z_M)^d with g = gcd(q, M).
/// This equals the exact Birkhoff limit of the T^q averages at x.
inline std::vector<double> invariant_projection(const MeasurableSet& B, Coord q) {
    if (q < 1) throw ValidationError("invariant_projection: q must be >= 1");
    const auto& sys = B.system;
    Coord g = gcd64(q, sys.modulus);
    auto counts = detail::coset_counts(B, g);
    const double coset_cells = static_cast<double>(sys.cells) /
                               static_cast<double>(detail::pow_size(g, sys.dimension));
    std::vector<double> out(sys.cells);
    for (std::size_t idx = 0; idx < sys.cells; ++idx) {
        auto x = sys.point_of(idx);
        std::size_t key = 0, stride = 1;
        for (int i = 0; i < sys.dimension; ++i) {
            key += static_cast<std::size_t>(x[static_cast<std::size_t>(i)] % g) * stride;
            stride *= static_cast<std::size_t>(g);
        }
        out[idx] = static_cast<double>(counts[key]) / coset_cells;
    }
    return out;
}

struct QTorsionProjection {
    std::vector<Complex> h;  // projection of 1_B - mu(B) onto the q-torsion characters
    double norm = 0.0;       // L2 norm of h
};

/// h = projection of 1_B onto span{ chi_k : k in ((M/g) Z_M)^d, k != 0 },
/// the nontrivial characters killed by q. Computed straight from character
/// sums, independently of invariant_projection, so that
/// P_{T^q} 1_B = mu(B) + h can be checked as an identity.
inline QTorsionProjection q_torsion_projection(const MeasurableSet& B, Coord q) {
    if (q < 1) throw ValidationError("q_torsion_projection: q must be >= 1");
    const auto& sys = B.system;
    const Coord M = sys.modulus;
    const int d = sys.dimension;
    Coord g = gcd64(q, M);
    Coord step = M / g;

    // Unit roots exp(2*pi*i*t/M).
    std::vector<Complex> root(static_cast<std::size_t>(M));
    for (Coord t = 0; t < M; ++t)
        root[static_cast<std::size_t>(t)] =
            Complex(std::cos(kTau * static_cast<double>(t) / static_cast<double>(M)),
                    std::sin(kTau * static_cast<double>(t) / static_cast<double>(M)));

    // Point digits, flattened once; reused for every character.
    std::vector<Coord> digits(sys.cells * static_cast<std::size_t>(d));
    for (std::size_t idx = 0; idx < sys.cells; ++idx) {
        std::size_t rest = idx;
        for (int i = 0; i < d; ++i) {
            digits[idx * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] =
                static_cast<Coord>(rest % static_cast<std::size_t>(M));
            rest /= static_cast<std::size_t>(M);
        }
    }
    std::vector<std::size_t> members;
    for (std::size_t idx = 0; idx < sys.cells; ++idx)
        if (B.mask[idx]) members.push_back(idx);

    const std::size_t torsion = detail::pow_size(g, d);
    QTorsionProjection result;
    result.h.assign(sys.cells, Complex(0.0, 0.0));

    std::vector<Coord> k(static_cast<std::size_t>(d), 0);
    for (std::size_t t = 1; t < torsion; ++t) {  // skip k = 0
        // t in mixed radix g gives k = step * digits
        std::size_t rest = t;
        for (int i = 0; i < d; ++i) {
            k[static_cast<std::size_t>(i)] = step * static_cast<Coord>(rest % static_cast<std::size_t>(g));
            rest /= static_cast<std::size_t>(g);
        }
        auto phase_of = [&](std::size_t idx) {
            Coord phase = 0;
            const Coord* x = &digits[idx * static_cast<std::size_t>(d)];
            for (int i = 0; i < d; ++i) phase = (phase + k[static_cast<std::size_t>(i)] * x[i]) % M;
            return static_cast<std::size_t>(phase);
        };
        Complex c(0.0, 0.0);
        for (std::size_t idx : members) c += std::conj(root[phase_of(idx)]);
        c /= static_cast<double>(sys.cells);
        for (std::size_t idx = 0; idx < sys.cells; ++idx) result.h[idx] += c * root[phase_of(idx)];
    }
    NeumaierSum sq;
    for (const auto& v : result.h) sq.add(std::norm(v));
    result.norm = std::sqrt(sq.value() / static_cast<double>(sys.cells));
    return result;
}

// ---------------------------------------------------------------------------
// Spectral coefficients (character/DFT expansion)
// ---------------------------------------------------------------------------

struct SpectralCoefficients {
    TorusSystem system;
    std::vector<Complex> coeffs;  // c_k = <f, chi_k>, indexed like points

    Complex at(std::span<const Coord> k) const { return coeffs[system.index_of(k)]; }

    double parseval_sum() const {
        NeumaierSum s;
        for (const auto& c : coeffs) s.add(std::norm(c));
        return s.value();
    }
};

/// c_k = (1/M^d) sum_x f(x) conj(chi_k(x)), by a separable axis-by-axis
/// transform.
inline SpectralCoefficients spectral_coefficients(const TorusSystem& sys,
                                                  std::span<const double> f) {
    if (f.size() != sys.cells) throw ValidationError("spectral_coefficients: size mismatch");
    const Coord M = sys.modulus;
    const auto m = static_cast<std::size_t>(M);
    std::vector<Complex> twiddle(m * m);
    for (Coord j = 0; j < M; ++j)
        for (Coord t = 0; t < M; ++t)
            twiddle[static_cast<std::size_t>(j * M + t)] =
                Complex(std::cos(-kTau * static_cast<double>(j * t % M) / static_cast<double>(M)),
                        std::sin(-kTau * static_cast<double>(j * t % M) / static_cast<double>(M)));

    std::vector<Complex> data(f.begin(), f.end());
    std::vector<Complex> line(m), transformed(m);
    std::size_t stride = 1;
    for (int axis = 0; axis < sys.dimension; ++axis) {
        const std::size_t block = stride * m;
        for (std::size_t start = 0; start < sys.cells; start += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t j = 0; j < m; ++j) line[j] = data[start + off + j * stride];
                for (std::size_t j = 0; j < m; ++j) {
                    Complex acc(0.0, 0.0);
                    const Complex* row = &twiddle[j * m];
                    for (std::size_t t = 0; t < m; ++t) acc += row[t] * line[t];
                    transformed[j] = acc;
                }
                for (std::size_t j = 0; j < m; ++j) data[start + off + j * stride] = transformed[j];
            }
        }
        stride *= m;
    }
    for (auto& c : data) c /= static_cast<double>(sys.cells);
    return {sys, std::move(data)};
}

// ---------------------------------------------------------------------------
// Equidistribution and the measure increment loop
// ---------------------------------------------------------------------------

struct EquidistributionResult {
    bool equidistributed = false;
    double max_density = 0.0;     // max_x P_{T^q} 1_B (x)
    double threshold = 0.0;       // (1 + delta) * mu(B)
    Component witness;            // coset attaining the max (meaningful on failure)
};

/// (q,delta)-equidistribution, evaluated exactly: on a finite torus the
/// Birkhoff limit of the T^q averages at x is the coset density P_{T^q}1_B(x),
/// so B is equidistributed iff max_x P_{T^q}1_B(x) <= (1+delta) mu(B).
inline EquidistributionResult is_equidistributed(const MeasurableSet& B, Coord q, double delta) {
    if (q < 1) throw ValidationError("is_equidistributed: q must be >= 1");
    if (delta < 0.0) throw ValidationError("is_equidistributed: delta must be >= 0");
    const auto& sys = B.system;
    Coord g = gcd64(q, sys.modulus);
    auto counts = detail::coset_counts(B, g);
    const double coset_cells = static_cast<double>(sys.cells) /
                               static_cast<double>(detail::pow_size(g, sys.dimension));
    std::size_t best = 0;
    for (std::size_t key = 1; key < counts.size(); ++key)
        if (counts[key] > counts[best]) best = key;  // first (lex-smallest) argmax

    EquidistributionResult r;
    r.max_density = static_cast<double>(counts[best]) / coset_cells;
    r.threshold = (1.0 + delta) * B.measure();
    r.equidistributed = r.max_density <= r.threshold;
    r.witness.modulus = sys.modulus;
    r.witness.dimension = sys.dimension;
    r.witness.gap = g;
    r.witness.base.assign(static_cast<std::size_t>(sys.dimension), 0);
    std::size_t rest = best;
    for (int i = 0; i < sys.dimension; ++i) {
        r.witness.base[static_cast<std::size_t>(i)] = static_cast<Coord>(rest % static_cast<std::size_t>(g));
        rest /= static_cast<std::size_t>(g);
    }
    return r;
}

struct IncrementStep {
    unsigned j = 0;          // component of T^{q^j}
    Coord gap = 1;           // gcd(q^j, M)
    LatticePoint base;       // coset representative, coords in [0, gap)
    double density = 0.0;    // nu_j(B)
};

class IncrementExhaustedError : public Error {
public:
    IncrementExhaustedError(const std::string& msg, std::vector<IncrementStep> partial)
        : Error(msg), partial_certificate(std::move(partial)) {}
    std::vector<IncrementStep> partial_certificate;
};

struct MeasureIncrementResult {
    BigInt Q;                 // q^J
    unsigned J = 0;
    Component component;      // T^Q-ergodic component carrying the final density
    std::vector<IncrementStep> certificate;
    double exponent_bound = 0.0;  // log(eps^-1)/log(1+delta)
    bool within_bound = false;    // J <= exponent_bound
};

/// The measure increment loop: pass to ergodic components of T^q, T^{q^2},...
/// while the conditional density of B grows by a factor (1+delta); stop as
/// soon as B is (q,delta)-equidistributed for the sub-action on the current
/// component. Throws IncrementExhaustedError (with the partial certificate)
/// if gcd(q^j, M) saturates while the equidistribution check still fails;
/// callers should pick M = q^K * M' with K >= the expected number of steps.
inline MeasureIncrementResult measure_increment(const MeasurableSet& B, Coord q, double delta,
                                                double epsilon) {
    if (q < 2) throw ValidationError("measure_increment: q must be >= 2");
    if (!(delta > 0.0)) throw ValidationError("measure_increment: delta must be > 0");
    if (!(epsilon > 0.0)) throw ValidationError("measure_increment: epsilon must be > 0");
    const double mu = B.measure();
    if (!(mu > epsilon))
        throw ValidationError("measure_increment: need mu(B) > epsilon, got mu(B) = " +
                              std::to_string(mu) + ", epsilon = " + std::to_string(epsilon));

    const auto& sys = B.system;
    const Coord M = sys.modulus;
    const int d = sys.dimension;

    Coord gap = 1;
    LatticePoint base(static_cast<std::size_t>(d), 0);
    double density = mu;
    std::vector<IncrementStep> cert{{0, 1, base, density}};

    unsigned j = 0;
    for (;;) {
        Coord next_gap = gcd_power(q, j + 1, M);
        // density of B on every coset of (next_gap Z_M)^d inside the current
        // component base + (gap Z_M)^d
        const std::size_t keys = detail::pow_size(next_gap, d);
        std::vector<std::int64_t> counts(keys, 0);
        for (std::size_t idx = 0; idx < sys.cells; ++idx) {
            if (!B.mask[idx]) continue;
            auto x = sys.point_of(idx);
            bool inside = true;
            std::size_t key = 0, stride = 1;
            for (int i = 0; i < d; ++i) {
                Coord c = x[static_cast<std::size_t>(i)];
                if (c % gap != base[static_cast<std::size_t>(i)]) {
                    inside = false;
                    break;
                }
                key += static_cast<std::size_t>(c % next_gap) * stride;
                stride *= static_cast<std::size_t>(next_gap);
            }
            if (inside) counts[key] += 1;
        }
        const double sub_cells = static_cast<double>(detail::pow_size(M / next_gap, d));
        std::size_t best = 0;
        for (std::size_t key = 1; key < keys; ++key)
            if (counts[key] > counts[best]) best = key;
        const double max_density = static_cast<double>(counts[best]) / sub_cells;

        if (max_density <= (1.0 + delta) * density) {
            MeasureIncrementResult result;
            result.J = j;
            result.Q = boost::multiprecision::pow(BigInt(q), j);
            result.component = Component{M, d, gap, base};
            result.certificate = cert;
            result.exponent_bound = std::log(1.0 / epsilon) / std::log1p(delta);
            result.within_bound = static_cast<double>(j) <= result.exponent_bound;
            return result;
        }
        if (next_gap == gap)
            throw IncrementExhaustedError(
                "measure_increment: gcd(q^j, M) saturated at " + std::to_string(gap) +
                    " before equidistribution was reached; pick M = q^K * M' with larger K",
                cert);

        gap = next_gap;
        base.assign(static_cast<std::size_t>(d), 0);
        std::size_t rest = best;
        for (int i = 0; i < d; ++i) {
            base[static_cast<std::size_t>(i)] = static_cast<Coord>(rest % static_cast<std::size_t>(next_gap));
            rest /= static_cast<std::size_t>(next_gap);
        }
        density = max_density;
        ++j;
        cert.push_back({j, gap, base, density});
    }
}

/// The gcd(Q, M)^d cosets of (g Z_M)^d, in lexicographic base order. Each is
/// T^Q-invariant with measure g^{-d} >= Q^{-d}, they partition X, and mu is
/// the average of the component measures; all four facts are re-checked here.
inline std::vector<Component> ergodic_components(const TorusSystem& sys, Coord Q) {
    if (Q < 1) throw ValidationError("ergodic_components: Q must be >= 1");
    const Coord g = gcd64(Q, sys.modulus);
    const int d = sys.dimension;
    const std::size_t count = detail::pow_size(g, d);
    std::vector<Component> components;
    components.reserve(count);
    for (std::size_t key = 0; key < count; ++key) {
        Component c;
        c.modulus = sys.modulus;
        c.dimension = d;
        c.gap = g;
        c.base.assign(static_cast<std::size_t>(d), 0);
        std::size_t rest = key;
        for (int i = 0; i < d; ++i) {
            c.base[static_cast<std::size_t>(i)] = static_cast<Coord>(rest % static_cast<std::size_t>(g));
            rest /= static_cast<std::size_t>(g);
        }
        // T^Q-invariance: shifting by Q*e_i must stay in the coset.
        if (Q % g != 0)
            throw Error("ergodic_components: internal invariance check failed");
        // mu(C) = g^-d >= Q^-d since g = gcd(Q, M) <= Q.
        if (c.measure() * std::pow(static_cast<double>(Q), d) < 1.0 - 1e-12)
            throw Error("ergodic_components: measure bound check failed");
        components.push_back(std::move(c));
    }
    // Partition check: every cell lies in exactly one component.
    for (std::size_t idx = 0; idx < sys.cells; ++idx) {
        auto x = sys.point_of(idx);
        std::size_t hits = 0;
        for (const auto& c : components)
            if (c.contains(x)) ++hits;
        if (hits != 1) throw Error("ergodic_components: partition check failed");
    }
    return components;
}

// ---------------------------------------------------------------------------
// Spherical averaging operators
// ---------------------------------------------------------------------------

/// The averaging operator f -> E_{a in S_N} f(. + q a), reduced to (Z_M)^d:
/// a weighted convolution whose weights are the residue profile of S_N with
/// residues scaled by q. Cost of one application is O(M^d * #offsets),
/// independent of |S_N|.
struct SphericalOperator {
    TorusSystem system;
    Coord radius_sq = 0;
    Coord q = 1;
    std::int64_t sphere_points = 0;
    std::vector<std::pair<LatticePoint, double>> weights;  // (offset digits, weight)
};

inline SphericalOperator make_spherical_operator(const TorusSystem& sys, Coord radius_sq, Coord q,
                                                 const Limits& limits = default_limits()) {
    if (q < 1) throw ValidationError("spherical operator: q must be >= 1");
    auto profile = residue_profile(sys.dimension, radius_sq, sys.modulus, limits);
    if (profile.total == 0)
        throw EmptySphereError("spherical operator: empty sphere (d=" +
                               std::to_string(sys.dimension) + ", N=" + std::to_string(radius_sq) + ")");
    SphericalOperator op{sys, radius_sq, q, profile.total, {}};
    const Coord M = sys.modulus;
    std::map<std::size_t, double> folded;  // scaled offset index -> weight
    std::vector<Coord> digits(static_cast<std::size_t>(sys.dimension));
    for (std::size_t key = 0; key < profile.counts.size(); ++key) {
        if (profile.counts[key] == 0) continue;
        std::size_t rest = key;
        for (int i = 0; i < sys.dimension; ++i) {
            Coord r = static_cast<Coord>(rest % static_cast<std::size_t>(M));
            rest /= static_cast<std::size_t>(M);
            digits[static_cast<std::size_t>(i)] = (r * (q % M)) % M;
        }
        folded[sys.index_of(digits)] += static_cast<double>(profile.counts[key]) /
                                        static_cast<double>(profile.total);
    }
    for (const auto& [idx, w] : folded) op.weights.emplace_back(sys.point_of(idx), w);
    return op;
}

/// out(x) = sum over offsets of weight * f(x + offset).
inline std::vector<double> apply_operator(const SphericalOperator& op, std::span<const double> f) {
    const auto& sys = op.system;
    if (f.size() != sys.cells) throw ValidationError("spherical operator: size mismatch");
    const Coord M = sys.modulus;
    const int d = sys.dimension;
    std::vector<std::size_t> stride(static_cast<std::size_t>(d));
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) {
        stride[static_cast<std::size_t>(i)] = s;
        s *= static_cast<std::size_t>(M);
    }
    std::vector<double> out(sys.cells, 0.0);
    std::vector<Coord> xd(static_cast<std::size_t>(d)), td(static_cast<std::size_t>(d));
    for (const auto& [offset, w] : op.weights) {
        std::fill(xd.begin(), xd.end(), 0);
        std::size_t t = sys.index_of(offset);
        for (int i = 0; i < d; ++i) td[static_cast<std::size_t>(i)] = offset[static_cast<std::size_t>(i)];
        for (std::size_t x = 0;; ++x) {
            out[x] += w * f[t];
            if (x + 1 == sys.cells) break;
            // advance x and x+offset together, digit by digit
            for (int i = 0;; ++i) {
                auto ii = static_cast<std::size_t>(i);
                if (++td[ii] == M) {
                    td[ii] = 0;
                    t -= static_cast<std::size_t>(M - 1) * stride[ii];
                } else {
                    t += stride[ii];
                }
                if (++xd[ii] < M) break;
                xd[ii] = 0;
            }
        }
    }
    return out;
}

/// x -> (1/|S_N|) sum_{a in S_N} f(x + a mod M); via the residue profile,
/// never by iterating S_N per point.
inline std::vector<double> spherical_average(const TorusSystem& sys, std::span<const double> f,
                                             Coord radius_sq,
                                             const Limits& limits = default_limits()) {
    return apply_operator(make_spherical_operator(sys, radius_sq, 1, limits), f);
}

/// || mu(B) - A_N 1_B ||_2 under the uniform measure; q scales the sphere
/// (the sub-action T^q), q = 1 is the plain spherical mean deviation.
inline double spherical_mean_deviation(const MeasurableSet& B, Coord radius_sq, Coord q = 1,
                                       const Limits& limits = default_limits()) {
    auto avg = apply_operator(make_spherical_operator(B.system, radius_sq, q, limits), B.indicator());
    const double mu = B.measure();
    NeumaierSum sq;
    for (double v : avg) sq.add((mu - v) * (mu - v));
    return std::sqrt(sq.value() / static_cast<double>(B.system.cells));
}

/// (1/|S_N|) sum_{a in S_N} mu(B cap T^{qa} B) = <1_B, A^{(q)}_N 1_B>.
inline double spherical_correlation(const MeasurableSet& B, Coord radius_sq, Coord q = 1,
                                    const Limits& limits = default_limits()) {
    auto avg = apply_operator(make_spherical_operator(B.system, radius_sq, q, limits), B.indicator());
    NeumaierSum acc;
    for (std::size_t idx = 0; idx < B.system.cells; ++idx)
        if (B.mask[idx]) acc.add(avg[idx]);
    return acc.value() / static_cast<double>(B.system.cells);
}

// ---------------------------------------------------------------------------
// Tree correlation recursion
// ---------------------------------------------------------------------------

/// E_{iota in I(tau)} mu( cap_{v in V} T^{q iota(v)} B ), by the leaf-peeling
/// recursion F_v = 1_B * prod_{children c} A_{phi(v,c)} F_c and integrating
/// F_root; cost O(|E| * M^d * #offsets), never enumerates I(tau).
inline double tree_correlation_expectation(const MeasurableSet& B, const RootedTree& rooted,
                                           Coord q, const Limits& limits = default_limits()) {
    const auto& sys = B.system;
    auto order = leaf_order(rooted);

    std::map<Coord, SphericalOperator> ops;
    for (const auto& e : order) {
        if (ops.count(e.label)) continue;
        try {
            ops.emplace(e.label, make_spherical_operator(sys, e.label, q, limits));
        } catch (const EmptySphereError&) {
            throw EmptySphereError("tree_correlation_expectation: empty sphere at edge {" +
                                   rooted.tree.vertices()[e.parent] + "," +
                                   rooted.tree.vertices()[e.child] + "} with label " +
                                   std::to_string(e.label));
        }
    }

    const auto indicator = B.indicator();
    std::vector<std::vector<double>> F(rooted.tree.vertices().size());
    // Children come after parents in a leaf order, so process edges backwards.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& child_f = F[it->child];
        if (child_f.empty()) child_f = indicator;
        auto averaged = apply_operator(ops.at(it->label), child_f);
        auto& parent_f = F[it->parent];
        if (parent_f.empty()) parent_f = indicator;
        for (std::size_t idx = 0; idx < sys.cells; ++idx) parent_f[idx] *= averaged[idx];
        child_f.clear();
        child_f.shrink_to_fit();
    }
    auto& root_f = F[rooted.root_index];
    if (root_f.empty()) root_f = indicator;  // single-vertex tree
    NeumaierSum acc;
    for (double v : root_f) acc.add(v);
    return acc.value() / static_cast<double>(sys.cells);
}

/// mu( cap_v T^{q iota(v)} B ) for one concrete placement, by direct mask
/// intersection. x is in the intersection iff x - q*iota(v) lies in B for
/// every vertex; the per-vertex shifted indices are walked incrementally.
inline double intersection_measure(const MeasurableSet& B, const std::vector<LatticePoint>& placement,
                                   Coord q) {
    const auto& sys = B.system;
    const Coord M = sys.modulus;
    const int d = sys.dimension;
    const std::size_t m = placement.size();

    std::vector<std::size_t> stride(static_cast<std::size_t>(d));
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) {
        stride[static_cast<std::size_t>(i)] = s;
        s *= static_cast<std::size_t>(M);
    }
    // Per-vertex digit counters of x - q*iota(v), plus their flat indices.
    std::vector<Coord> td(m * static_cast<std::size_t>(d));
    std::vector<std::size_t> t(m, 0);
    for (std::size_t v = 0; v < m; ++v)
        for (int i = 0; i < d; ++i) {
            Coord c = ((-(q % M) * (placement[v][static_cast<std::size_t>(i)] % M)) % M + M) % M;
            td[v * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = c;
            t[v] += static_cast<std::size_t>(c) * stride[static_cast<std::size_t>(i)];
        }
    std::vector<Coord> xd(static_cast<std::size_t>(d), 0);

    std::size_t count = 0;
    for (std::size_t x = 0;; ++x) {
        bool all = true;
        for (std::size_t v = 0; v < m; ++v)
            if (!B.mask[t[v]]) {
                all = false;
                break;
            }
        if (all) ++count;
        if (x + 1 == sys.cells) break;
        for (int i = 0;; ++i) {
            auto ii = static_cast<std::size_t>(i);
            for (std::size_t v = 0; v < m; ++v) {
                auto& dv = td[v * static_cast<std::size_t>(d) + ii];
                if (++dv == M) {
                    dv = 0;
                    t[v] -= static_cast<std::size_t>(M - 1) * stride[ii];
                } else {
                    t[v] += stride[ii];
                }
            }
            if (++xd[ii] < M) break;
            xd[ii] = 0;
        }
    }
    return static_cast<double>(count) / static_cast<double>(sys.cells);
}

struct RecurrentEmbeddingResult {
    bool found = false;   // some embedding reached the threshold
    bool capped = false;  // the iteration cap stopped the stream early
    Immersion best;
    double best_measure = -1.0;
    std::uint64_t immersions_seen = 0;
    std::uint64_t embeddings_seen = 0;
};

/// Streams embeddings in canonical order, evaluates mu( cap_v T^{q iota(v)}B )
/// for each, and returns the first one reaching `threshold`, or the best
/// found once the stream ends or the iteration cap is hit. NotFound is a
/// result, not an error.
inline RecurrentEmbeddingResult find_recurrent_embedding(const MeasurableSet& B,
                                                         const RootedTree& rooted, Coord q,
                                                         double threshold,
                                                         std::uint64_t iteration_cap = 1'000'000,
                                                         const Limits& limits = default_limits()) {
    RecurrentEmbeddingResult result;
    for_each_immersion(rooted, B.system.dimension, [&](const std::vector<LatticePoint>& placement) {
        if (result.immersions_seen >= iteration_cap) {
            result.capped = true;
            return false;
        }
        ++result.immersions_seen;
        if (!placement_injective(placement)) return true;
        ++result.embeddings_seen;
        double measure = intersection_measure(B, placement, q);
        if (measure > result.best_measure) {
            result.best_measure = measure;
            result.best = Immersion{placement};
        }
        if (measure >= threshold) {
            result.found = true;
            return false;
        }
        return true;
    }, limits);
    return result;
}

// ---------------------------------------------------------------------------
// Pointwise exception sets
// ---------------------------------------------------------------------------

struct ExceptionSetResult {
    MeasurableSet exception_set;  // U_N
    double exception_measure = 0.0;
    double good_mass = 0.0;       // mu(B \ U_N)
    double deviation = 0.0;       // || mu(B) - A_N 1_B ||_2
};

/// U_N = { x : |mu(B) - (A_N 1_B)(x)| >= epsilon } and mu(B \ U_N).
/// mu(U_N) <= deviation / epsilon always (Markov through L2).
inline ExceptionSetResult pointwise_exception_set(const MeasurableSet& B, Coord radius_sq,
                                                  double epsilon,
                                                  const Limits& limits = default_limits()) {
    if (!(epsilon > 0.0)) throw ValidationError("pointwise_exception_set: epsilon must be > 0");
    const auto& sys = B.system;
    auto avg = apply_operator(make_spherical_operator(sys, radius_sq, 1, limits), B.indicator());
    const double mu = B.measure();
    ExceptionSetResult r{MeasurableSet(sys), 0.0, 0.0, 0.0};
    NeumaierSum sq;
    std::size_t in_exception = 0, good = 0;
    for (std::size_t idx = 0; idx < sys.cells; ++idx) {
        double dev = std::abs(mu - avg[idx]);
        sq.add(dev * dev);
        if (dev >= epsilon) {
            r.exception_set.mask[idx] = 1;
            ++in_exception;
        } else if (B.mask[idx]) {
            ++good;
        }
    }
    r.exception_measure = static_cast<double>(in_exception) / static_cast<double>(sys.cells);
    r.good_mass = static_cast<double>(good) / static_cast<double>(sys.cells);
    r.deviation = std::sqrt(sq.value() / static_cast<double>(sys.cells));
    return r;
}

struct MultiPointwiseEntry {
    Coord radius_sq = 0;
    double exception_measure = 0.0;
    double deviation = 0.0;
};

struct MultiPointwiseResult {
    double witness_mass = 0.0;  // mu(B \ union_j U_{N_j})
    std::vector<MultiPointwiseEntry> per_radius;
};

/// mu(B \ union_j U_{N_j}); positive mass certifies simultaneous recurrence
/// at every N_j on this instance.
inline MultiPointwiseResult multi_pointwise_check(const MeasurableSet& B,
                                                  const std::vector<Coord>& radii, double epsilon,
                                                  const Limits& limits = default_limits()) {
    const auto& sys = B.system;
    std::vector<std::uint8_t> excluded(sys.cells, 0);
    MultiPointwiseResult result;
    for (Coord N : radii) {
        auto one = pointwise_exception_set(B, N, epsilon, limits);
        for (std::size_t idx = 0; idx < sys.cells; ++idx)
            excluded[idx] |= one.exception_set.mask[idx];
        result.per_radius.push_back({N, one.exception_measure, one.deviation});
    }
    std::size_t good = 0;
    for (std::size_t idx = 0; idx < sys.cells; ++idx)
        if (B.mask[idx] && !excluded[idx]) ++good;
    result.witness_mass = static_cast<double>(good) / static_cast<double>(sys.cells);
    return result;
}

// ---------------------------------------------------------------------------
// Spherical mean deviation, decomposed through the character spectrum
// ---------------------------------------------------------------------------

struct DeviationDecomposition {
    double deviation = 0.0;        // || mu(B) - A_N 1_B ||_2
    double torsion_norm = 0.0;     // || h ||_2, h = q-torsion part of 1_B
    double offgrid_mass = 0.0;     // sqrt( sum_{k not in R_q} |c_k|^2 )
    double max_offgrid_modulus = 0.0;  // max over k in supp(c) \ R_q of |exp sum at k/M|
    double bound = 0.0;            // torsion_norm + max_offgrid_modulus * offgrid_mass
    double spectral_deviation = 0.0;   // sqrt( sum_{k != 0} |c_k|^2 |S_hat(k/M)|^2 )
};

/// The exact finite form of the spherical mean estimate: split the spectrum
/// of 1_B at the q-torsion characters R_q. The k in R_q^* carry at most
/// ||h||_2 (the equidistribution part) and every other character is damped
/// by the exponential sum at k/M, so
///   deviation <= ||h||_2 + max_{k in supp \ R_q} |S_hat_N(k/M)| * offgrid_mass.
inline DeviationDecomposition deviation_decomposition(const MeasurableSet& B, Coord radius_sq,
                                                      Coord q,
                                                      const Limits& limits = default_limits()) {
    const auto& sys = B.system;
    const Coord M = sys.modulus;
    DeviationDecomposition out;
    out.deviation = spherical_mean_deviation(B, radius_sq, 1, limits);

    auto spectrum = spectral_coefficients(sys, B.indicator());
    BigInt size = sphere_size(sys.dimension, radius_sq);
    if (size == 0) throw EmptySphereError("deviation_decomposition: empty sphere");
    const double norm = to_double(size);

    const Coord g = gcd64(q, M);
    const Coord step = M / g;
    NeumaierSum torsion_sq, offgrid_sq, spectral_sq;
    constexpr double kSupportTol = 1e-13;
    for (std::size_t idx = 1; idx < sys.cells; ++idx) {  // skip k = 0
        const double csq = std::norm(spectrum.coeffs[idx]);
        auto k = sys.point_of(idx);
        bool torsion = true;
        for (int i = 0; i < sys.dimension; ++i)
            if (k[static_cast<std::size_t>(i)] % step != 0) {
                torsion = false;
                break;
            }
        double shat = 0.0;
        const bool in_support = csq > kSupportTol * kSupportTol;
        if (in_support) {
            // Characters with negligible coefficients contribute < 1e-26 to
            // the spectral identity; skipping their exponential sums keeps
            // the cost proportional to the support size.
            std::vector<double> freq(static_cast<std::size_t>(sys.dimension));
            for (int i = 0; i < sys.dimension; ++i)
                freq[static_cast<std::size_t>(i)] =
                    static_cast<double>(k[static_cast<std::size_t>(i)]) / static_cast<double>(M);
            shat = exp_sum_by_radius_unnormalized(sys.dimension, radius_sq, Frequency(freq)) / norm;
        }
        spectral_sq.add(csq * shat * shat);
        if (torsion) {
            torsion_sq.add(csq);
        } else {
            offgrid_sq.add(csq);
            if (in_support)
                out.max_offgrid_modulus = std::max(out.max_offgrid_modulus, std::abs(shat));
        }
    }
    out.torsion_norm = std::sqrt(torsion_sq.value());
    out.offgrid_mass = std::sqrt(offgrid_sq.value());
    out.spectral_deviation = std::sqrt(spectral_sq.value());
    out.bound = out.torsion_norm + out.max_offgrid_modulus * out.offgrid_mass;
    return out;
}

}  // namespace latrec
