#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corners/errors.hpp"
#include "corners/kernel.hpp"
#include "oracles.hpp"

using namespace corners;

namespace {
const double kGStarT = 13.0 / 32.0;
}

TEST_CASE("expectation on frozen kernels") {
    CHECK(expectation(DiscreteKernel::constant(3, 2, 4, 0.3)) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(expectation(oracles::g_star()) == doctest::Approx(0.75).epsilon(1e-15));
    DiscreteKernel one = DiscreteKernel::constant(1, 1, 1, 1.0);
    CHECK(expectation(one) == 1.0);
}

TEST_CASE("conditionals of g_star and total expectation law") {
    const auto k = oracles::g_star();
    const auto f3 = conditional_xy(k);
    // brute-force over the 8 cells: 1/2 on the diagonal, 1 off it
    CHECK(f3[0] == doctest::Approx(0.5));
    CHECK(f3[1] == doctest::Approx(1.0));
    CHECK(f3[2] == doctest::Approx(1.0));
    CHECK(f3[3] == doctest::Approx(0.5));
    // g_star is symmetric, so the other two conditionals match
    CHECK(conditional_xz(k) == f3);
    CHECK(conditional_yz(k) == f3);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto rk = oracles::random_kernel(3, 2, 4, seed);
        const auto c = conditional_xy(rk);
        double mean = 0.0;
        for (std::size_t i = 0; i < rk.mx(); ++i)
            for (std::size_t j = 0; j < rk.my(); ++j) mean += rk.p[i] * rk.q[j] * c[i * rk.my() + j];
        CHECK(mean == doctest::Approx(expectation(rk)).epsilon(1e-12));
        for (double v : c) CHECK((v >= 0.0 && v <= 1.0 + 1e-15));
    }
}

TEST_CASE("t_value frozen values and six-loop oracle") {
    CHECK(t_value(oracles::g_star()) == doctest::Approx(kGStarT).epsilon(1e-15));
    CHECK(t_value(DiscreteKernel::constant(2, 3, 2, 1.0)) == doctest::Approx(1.0));
    const auto c = DiscreteKernel::constant(2, 2, 2, 0.4);
    CHECK(t_value(c) == doctest::Approx(0.4 * 0.4 * 0.4).epsilon(1e-13));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto k = oracles::random_kernel(3, 3, 3, seed);
        CHECK(t_value(k) == doctest::Approx(oracles::t_value_six_loop(k)).epsilon(1e-11));
    }
}

TEST_CASE("exact rational path") {
    const auto k = oracles::g_star();
    REQUIRE(exact_eligible(k));
    CHECK(expectation_exact(k) == BigRat(3, 4));
    CHECK(t_value_exact(k) == BigRat(13, 32));
    CHECK(format_rational(t_value_exact(k)) == "13/32");

    // marginals that do not sum to one exactly as rationals are not eligible
    DiscreteKernel k2 = k;
    k2.p = {0.2, 0.8};
    CHECK_FALSE(exact_eligible(k2));
    // cell budget
    CHECK_FALSE(exact_eligible(tensor_power(k, 4), 4095));
    CHECK(exact_eligible(tensor_power(k, 4), 4096));
}

TEST_CASE("tensor_power multiplies both functionals") {
    const auto g = oracles::g_star();
    const auto g2 = tensor_power(g, 2);
    CHECK(t_value_exact(g2) == BigRat(169, 1024));
    CHECK(expectation_exact(tensor_power(g, 3)) == BigRat(27, 64));

    const auto g1 = tensor_power(g, 1);
    CHECK(g1.values == g.values);
    CHECK(g1.p == g.p);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto k = oracles::random_kernel(2, 3, 2, seed);
        const double e = expectation(k), t = t_value(k);
        for (unsigned n = 1; n <= 4; ++n) {
            const auto kn = tensor_power(k, n);
            CHECK(expectation(kn) == doctest::Approx(std::pow(e, n)).epsilon(1e-9));
            CHECK(t_value(kn) == doctest::Approx(std::pow(t, n)).epsilon(1e-9));
        }
    }
}

TEST_CASE("tensor_power budget error names the offending size") {
    const auto k = oracles::random_kernel(4, 4, 4, 1);
    CHECK_THROWS_AS((void)tensor_power(k, 0), DomainError);
    CHECK_THROWS_AS((void)tensor_power(k, 5, 1000000), ResourceError);
    try {
        (void)tensor_power(k, 5, 1000000);
    } catch (const ResourceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("budget") != std::string::npos);
        CHECK(msg.find("1000000") != std::string::npos);
    }
}

TEST_CASE("scale homogeneity") {
    const auto g = oracles::g_star();
    CHECK(scale(g, 1.0).values == g.values);
    CHECK(t_value(scale(g, 0.0)) == 0.0);
    // beta^3 homogeneity, cross-checked against direct evaluation
    CHECK(t_value(scale(g, 0.5)) == doctest::Approx(13.0 / 256.0).epsilon(1e-13));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto k = oracles::random_kernel(2, 2, 3, seed);
        const double beta = 0.1 + 0.08 * static_cast<double>(seed);
        CHECK(expectation(scale(k, beta)) == doctest::Approx(beta * expectation(k)).epsilon(1e-12));
        CHECK(t_value(scale(k, beta)) ==
              doctest::Approx(beta * beta * beta * t_value(k)).epsilon(1e-11));
    }
    CHECK_THROWS_AS((void)scale(g, 1.5), DomainError);
}

TEST_CASE("epsilon_mix endpoints, expectation shift, and T window") {
    const auto g = oracles::g_star();
    CHECK(epsilon_mix(g, 0.0).values == g.values);
    const auto full = epsilon_mix(g, 1.0);
    for (double v : full.values) CHECK(v == 1.0);
    CHECK(expectation(epsilon_mix(g, 0.1)) == doctest::Approx(0.775).epsilon(1e-14));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto k = oracles::random_kernel(3, 2, 2, seed);
        const double eps = 0.05 * static_cast<double>(seed % 10) + 0.01;
        const double t0 = t_value(k), t1 = t_value(epsilon_mix(k, eps));
        CHECK(t1 >= t0 - 1e-12);
        CHECK(t1 - t0 <= 3 * eps + 3 * eps * eps + eps * eps * eps + 1e-12);
    }
    CHECK_THROWS_AS((void)epsilon_mix(g, -0.1), DomainError);
}

TEST_CASE("piecewise conversions") {
    // the g pattern as a piecewise function with cuts {0, 1/2, 1}
    PiecewiseKernel pk;
    pk.x_cuts = pk.y_cuts = pk.z_cuts = {0.0, 0.5, 1.0};
    pk.values = {0, 1, 1, 1, 1, 1, 1, 0};
    const auto k = from_piecewise(pk);
    CHECK(k.p == std::vector<double>{0.5, 0.5});
    CHECK(t_value_exact(k) == BigRat(13, 32));

    const auto back = to_piecewise(oracles::g_star());
    CHECK(back.x_cuts == std::vector<double>{0.0, 0.5, 1.0});

    PiecewiseKernel single;
    single.x_cuts = single.y_cuts = single.z_cuts = {0.0, 1.0};
    single.values = {0.37};
    CHECK(expectation(from_piecewise(single)) == doctest::Approx(0.37));

    DiscreteKernel uneven;
    uneven.p = {0.2, 0.8};
    uneven.q = {1.0};
    uneven.r = {1.0};
    uneven.values = {0.5, 0.5};
    const auto cuts = to_piecewise(uneven).x_cuts;
    CHECK(cuts[0] == 0.0);
    CHECK(cuts[1] == doctest::Approx(0.2));
    CHECK(cuts[2] == 1.0);

    // zero-probability entry -> zero-width cell, functionals unchanged
    DiscreteKernel degen;
    degen.p = {0.0, 1.0};
    degen.q = {1.0};
    degen.r = {1.0};
    degen.values = {0.9, 0.25};
    const auto rt = from_piecewise(to_piecewise(degen));
    CHECK(expectation(rt) == doctest::Approx(0.25).epsilon(1e-14));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto rk = oracles::random_kernel(3, 4, 2, seed);
        const auto round = from_piecewise(to_piecewise(rk));
        CHECK(t_value(round) == doctest::Approx(t_value(rk)).epsilon(1e-12));
        CHECK(expectation(round) == doctest::Approx(expectation(rk)).epsilon(1e-12));
    }
}

TEST_CASE("validation errors") {
    DiscreteKernel bad = oracles::g_star();
    bad.p = {0.4, 0.4};
    CHECK_THROWS_AS(validate(bad), ValidationError);
    CHECK_THROWS_AS((void)expectation(bad), ValidationError);
    CHECK_NOTHROW(validate(renormalized(bad)));

    bad = oracles::g_star();
    bad.values[3] = 1.5;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad.values[3] = -0.1;
    CHECK_THROWS_AS(validate(bad), ValidationError);

    bad = oracles::g_star();
    bad.p = {0.5, -0.5};
    CHECK_THROWS_AS(validate(bad), ValidationError);

    PiecewiseKernel pk;
    pk.x_cuts = {0.0, 0.6, 0.5, 1.0};  // decreasing
    pk.y_cuts = pk.z_cuts = {0.0, 1.0};
    pk.values.assign(3, 0.5);
    CHECK_THROWS_AS(validate(pk), ValidationError);
}

TEST_CASE("inequality window on random kernels") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto k = oracles::random_kernel(1 + seed % 4, 1 + (seed / 2) % 4, 1 + (seed / 3) % 4,
                                              seed * 977 + 5);
        const double e = expectation(k), t = t_value(k);
        CHECK(t >= -1e-15);
        CHECK(t <= 1.0 + 1e-12);
        CHECK(t >= 3 * e - 2 - 1e-12);
        CHECK(t >= e * e * e * e - 1e-12);
        CHECK(t >= e * e * e * e / 256.0 - 1e-12);
    }
}
