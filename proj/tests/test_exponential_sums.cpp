#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "latrec/exponential_sums.hpp"
#include "oracles.hpp"

using namespace latrec;

TEST_CASE("lcm_up_to: frozen values and divisibility") {
    REQUIRE(lcm_up_to(1) == 1);
    REQUIRE(lcm_up_to(6) == 60);
    REQUIRE(lcm_up_to(10) == 2520);
    for (std::int64_t k : {4, 9, 17, 30}) {
        BigInt q = lcm_up_to(k);
        for (std::int64_t i = 1; i <= k; ++i) REQUIRE(q % i == 0);
        // minimality at the top: q/p fails to be divisible by some i for any
        // prime p | q
        REQUIRE(q <= lcm_up_to(k + 1));
    }
}

TEST_CASE("arc parameters: q and width") {
    auto p = make_arc_parameters(0.5, 1.0, 64);
    REQUIRE(p.lcm_bound == 4);
    REQUIRE(p.q == 12);
    REQUIRE(p.width == Catch::Approx(1.0 / std::sqrt(0.5 * 64.0)));

    auto tiny = make_arc_parameters(2.0, 1.0, 5);  // C*eta^-2 < 1: empty lcm range
    REQUIRE(tiny.q == 1);

    REQUIRE_THROWS_AS(make_arc_parameters(-1.0, 1.0, 5), ValidationError);
    REQUIRE_THROWS_AS(make_arc_parameters(0.5, 1.0, 0), ValidationError);
    REQUIRE_THROWS_AS(make_arc_parameters(1e-4, 1.0, 10), ResourceLimitError);
}

TEST_CASE("exp_sum: exact cases") {
    auto s51 = enumerate_sphere(5, 1);
    SECTION("theta = 0 gives exactly 1") {
        auto v = exp_sum(s51, Frequency::zero(5));
        REQUIRE(std::abs(v - Complex(1.0, 0.0)) < 1e-12);
    }
    SECTION("theta = (1/2,...,1/2) gives (-1)^N") {
        for (Coord n : {1, 2, 3, 4, 9, 16, 30}) {
            auto sphere = enumerate_sphere(5, n);
            auto v = exp_sum(sphere, Frequency(std::vector<double>(5, 0.5)));
            double expected = (n % 2 == 0) ? 1.0 : -1.0;
            REQUIRE(std::abs(v - Complex(expected, 0.0)) < 1e-12);
        }
    }
    SECTION("d=5, N=1, theta=(1/4,0,0,0,0) gives 0.8") {
        auto v = exp_sum(s51, Frequency({0.25, 0, 0, 0, 0}));
        REQUIRE(std::abs(v - Complex(0.8, 0.0)) < 1e-12);
    }
    SECTION("empty sphere raises") {
        auto empty = enumerate_sphere(3, 7);
        REQUIRE_THROWS_AS(exp_sum(empty, Frequency::zero(3)), EmptySphereError);
    }
    SECTION("dimension mismatch raises") {
        REQUIRE_THROWS_AS(exp_sum(s51, Frequency::zero(3)), ValidationError);
    }
}

TEST_CASE("exp_sum: modulus bound, conjugation, integer shifts") {
    Rng rng(20250810);
    for (int trial = 0; trial < 50; ++trial) {
        Coord n = 1 + static_cast<Coord>(rng.next_below(60));
        auto sphere = enumerate_sphere(5, n);
        if (sphere.size() == 0) continue;
        std::vector<double> coords(5);
        for (auto& c : coords) c = rng.next_unit();
        Frequency theta{coords};

        auto v = exp_sum(sphere, theta);
        REQUIRE(std::abs(v) <= 1.0 + 1e-12);

        auto conj = exp_sum(sphere, theta.negated());
        REQUIRE(std::abs(conj - std::conj(v)) < 1e-12);

        std::vector<double> shifted = coords;
        shifted[0] += 3.0;
        shifted[3] -= 2.0;
        auto w = exp_sum(sphere, Frequency{shifted});
        REQUIRE(std::abs(w - v) < 1e-12);
    }
}

TEST_CASE("layered evaluator agrees with the direct sum") {
    Rng rng(77);
    for (int d : {3, 5}) {
        for (Coord n : {5, 23, 50}) {
            auto sphere = enumerate_sphere(d, n);
            if (sphere.size() == 0) continue;
            for (int trial = 0; trial < 8; ++trial) {
                std::vector<double> coords(static_cast<std::size_t>(d));
                for (auto& c : coords) c = rng.next_unit();
                Frequency theta{coords};
                double layered = exp_sum_by_radius_unnormalized(d, n, theta) /
                                 static_cast<double>(sphere.size());
                auto direct = exp_sum(sphere, theta);
                REQUIRE(std::abs(direct.imag()) < 1e-10);  // spheres are symmetric
                REQUIRE(layered == Catch::Approx(direct.real()).margin(1e-10));
            }
        }
    }
    SECTION("theta = 0 recovers the sphere size") {
        REQUIRE(exp_sum_by_radius_unnormalized(5, 40, Frequency::zero(5)) ==
                Catch::Approx(to_double(sphere_size(5, 40))).margin(1e-9));
    }
}

TEST_CASE("classify_arc") {
    auto params = make_arc_parameters(0.5, 1.0, 8192);  // q = 12, width = 0.015625
    REQUIRE(params.width < 1.0 / 48.0);

    SECTION("the zero frequency is major") {
        REQUIRE(classify_arc(Frequency::zero(5), params) == ArcClass::Major);
    }
    SECTION("exact grid points are major") {
        REQUIRE(classify_arc(Frequency({1.0 / 12.0, 0, 0, 0, 0}), params) == ArcClass::Major);
        REQUIRE(classify_arc(Frequency({5.0 / 12.0, 7.0 / 12.0, 0, 1.0 / 3.0, 0.5}), params) ==
                ArcClass::Major);
    }
    SECTION("grid-cell midpoints are minor when the width allows") {
        REQUIRE(classify_arc(Frequency({1.0 / 24.0, 0, 0, 0, 0}), params) == ArcClass::Minor);
    }
    SECTION("one far coordinate makes the point minor") {
        REQUIRE(classify_arc(Frequency({0, 0, 1.0 / 24.0, 0, 0}), params) == ArcClass::Minor);
    }
}

TEST_CASE("scan_minor_arcs") {
    SECTION("deterministic given the seed") {
        auto a = scan_minor_arcs(5, 0.4, 0.25, 120, 60, 42);
        auto b = scan_minor_arcs(5, 0.4, 0.25, 120, 60, 42);
        REQUIRE(a.evaluated_minor == b.evaluated_minor);
        REQUIRE(a.max_modulus == b.max_modulus);
        REQUIRE(a.argmax_theta == b.argmax_theta);
        REQUIRE(a.evaluated_minor + a.rejected_major == 60);
    }
    SECTION("zero samples: no max modulus") {
        auto r = scan_minor_arcs(5, 0.5, 1.0, 64, 0, 7);
        REQUIRE(r.requested_samples == 0);
        REQUIRE_FALSE(r.max_modulus.has_value());
    }
    SECTION("empty sphere is flagged and skipped") {
        auto r = scan_minor_arcs(3, 0.5, 1.0, 7, 50, 7);
        REQUIRE(r.empty_sphere);
        REQUIRE(r.evaluated_minor == 0);
        REQUIRE_FALSE(r.warnings.empty());
    }
    SECTION("warns when N is below the validity threshold C*eta^-4") {
        auto r = scan_minor_arcs(5, 0.5, 1.0, 4, 10, 7);  // threshold is 16
        REQUIRE_FALSE(r.warnings.empty());
    }
}

TEST_CASE("estimate_constant") {
    SECTION("singleton passing grid returns that value") {
        // eta=0.5, C=1: q=12 and the major arcs cover the whole torus for
        // N in [16, 24], so the scans cannot record violations.
        auto r = estimate_constant(5, 0.5, 16, 24, 4, {1.0}, 40, 3);
        REQUIRE(r.found);
        REQUIRE(r.chosen_C == 1.0);
        REQUIRE(r.candidates.size() == 1);
        REQUIRE(r.candidates[0].passed);
    }
    SECTION("grid whose thresholds exceed the range: explicit none-found") {
        auto r = estimate_constant(5, 0.5, 16, 24, 4, {5000.0}, 40, 3);
        REQUIRE_FALSE(r.found);
        REQUIRE_FALSE(r.candidates[0].applicable);
    }
    SECTION("violating candidate is rejected with a recorded first violation") {
        // q = 1 and a wide minor region at small N: samples near (1/2,...,1/2)
        // evaluate close to 1 > eta.
        auto r = estimate_constant(5, 0.1, 100, 104, 1, {0.01, 5000.0}, 200, 11);
        REQUIRE_FALSE(r.candidates.empty());
        if (r.candidates[0].violations > 0) {
            REQUIRE_FALSE(r.candidates[0].passed);
            REQUIRE(r.candidates[0].first_violation_n >= 100);
        }
    }
    SECTION("validation") {
        REQUIRE_THROWS_AS(estimate_constant(5, 0.5, 10, 5, 1, {1.0}, 10, 0), ValidationError);
        REQUIRE_THROWS_AS(estimate_constant(5, 0.5, 5, 10, 1, {}, 10, 0), ValidationError);
        REQUIRE_THROWS_AS(estimate_constant(5, 0.5, 5, 10, 1, {2.0, 1.0}, 10, 0), ValidationError);
    }
}
