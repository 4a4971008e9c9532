#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace latrec {

using BigInt = boost::multiprecision::cpp_int;
using Coord = std::int64_t;
using LatticePoint = std::vector<Coord>;
using Complex = std::complex<double>;

constexpr double kTau = 6.28318530717958647692528676655900577;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid arguments or violated preconditions.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// A configured work or memory ceiling would be exceeded.
class ResourceLimitError : public Error {
public:
    explicit ResourceLimitError(const std::string& msg) : Error(msg) {}
};

/// An operation over a discrete sphere received an empty sphere.
class EmptySphereError : public ValidationError {
public:
    explicit EmptySphereError(const std::string& msg) : ValidationError(msg) {}
};

// ---------------------------------------------------------------------------
// Work ceilings (overridable per call)
// ---------------------------------------------------------------------------

struct Limits {
    std::uint64_t max_sphere_points = 4'000'000;     // enumerate_sphere output cap
    std::uint64_t max_profile_work = 2'000'000'000;  // residue profile DP op cap
    std::uint64_t max_immersions = 1'000'000;        // uncapped immersion streams
    std::uint64_t max_torus_cells = 16'000'000;      // M^d cap for torus systems
};

inline const Limits& default_limits() {
    static const Limits limits{};
    return limits;
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

/// Floor of sqrt(n) for n >= 0, exact.
inline Coord isqrt(Coord n) {
    if (n < 0) throw ValidationError("isqrt: negative argument");
    if (n == 0) return 0;
    auto r = static_cast<Coord>(std::sqrt(static_cast<double>(n)));
    while (r > 0 && r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

inline Coord gcd64(Coord a, Coord b) {
    while (b != 0) {
        Coord t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

/// gcd(q^j, m) without forming q^j: iterate g <- gcd(g*q mod m, m), j times.
inline Coord gcd_power(Coord q, unsigned j, Coord m) {
    if (m <= 0 || q <= 0) throw ValidationError("gcd_power: arguments must be positive");
    Coord g = 1;
    for (unsigned i = 0; i < j; ++i) {
        Coord prod = (g % m) * (q % m) % m;  // gcd(a, m) == gcd(a mod m, m)
        Coord next = prod == 0 ? m : gcd64(prod, m);
        if (next == g) break;  // saturated: g depends only on the previous g
        g = next;
        if (g == m) break;
    }
    return g;
}

inline double to_double(const BigInt& v) { return v.convert_to<double>(); }

// Compensated (Neumaier) accumulator: keeps sums of ~1e6 doubles accurate
// to the last few ulps, which the 1e-12 identity checks need.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Combine a base seed with stream coordinates into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = seed ^ (a * 0xD1342543DE82EF95ull) ^ (b * 0xAF251AF3B0F025B5ull);
    splitmix64(s);
    return splitmix64(s);
}

// mt19937_64 is fully specified by the standard, so streams are portable.
// Doubles are produced by explicit mantissa mapping, not by
// uniform_real_distribution (whose output is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double next_unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Multiply-shift rejection-free mapping; bias < 2^-64, irrelevant here,
        // and deterministic across platforms.
        unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Exact dyadic view of a double: x = num * 2^exp2 (for exact torus arithmetic)
// ---------------------------------------------------------------------------

struct Dyadic {
    BigInt num;
    int exp2 = 0;  // x = num * 2^exp2
};

inline Dyadic to_dyadic(double x) {
    if (!std::isfinite(x)) throw ValidationError("to_dyadic: non-finite value");
    Dyadic d;
    if (x == 0.0) return d;
    int e = 0;
    double m = std::frexp(x, &e);  // x = m * 2^e, |m| in [0.5, 1)
    auto scaled = static_cast<std::int64_t>(std::ldexp(m, 53));
    d.num = scaled;
    d.exp2 = e - 53;
    return d;
}

}  // namespace latrec
