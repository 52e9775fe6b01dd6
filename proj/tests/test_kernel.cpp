#include <doctest.h>

#include <cmath>
#include <random>

#include "hk/dynamics.hpp"
#include "hk/kernel.hpp"
#include "support/oracles.hpp"

using namespace hk;

namespace {
const KernelParams kHalf{0.5, 1.0};

ParticleEnsemble single_at_origin() { return make_ensemble({0.0}, {1.0}); }
ParticleEnsemble symmetric_pair() { return make_ensemble({-1.0, 1.0}, {0.5, 0.5}); }
}  // namespace

TEST_CASE("eta: values, monotonicity, exponential law") {
    CHECK(eta(0.0, kHalf) == 1.0);
    CHECK(eta(2.0, kHalf) == doctest::Approx(1.8315638888734179e-2).epsilon(1e-14));
    CHECK(eta(2.0, kHalf) == std::exp(-4.0));

    double prev = 1.0;
    for (double z = 0.1; z < 6.0; z += 0.1) {
        const double e = eta(z, kHalf);
        CHECK(e < prev);
        CHECK(e > 0.0);
        prev = e;
    }

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> dist(0.0, 8.0);
    for (int it = 0; it < 200; ++it) {
        const double z = dist(gen), w = dist(gen);
        CHECK(eta(z, kHalf) * eta(w, kHalf) ==
              doctest::Approx(eta(z + w, kHalf)).epsilon(1e-14));
    }

    CHECK_THROWS_AS(eta(-0.1, kHalf), std::invalid_argument);
    CHECK_THROWS_AS((KernelParams{-0.5, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((KernelParams{0.5, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("field_g: closed forms and positivity") {
    const auto one = single_at_origin();
    for (double x : {-2.0, -0.3, 0.0, 0.7, 3.1})
        CHECK(field_g(one, x, kHalf) == doctest::Approx(std::exp(-2.0 * std::abs(x))).epsilon(1e-15));
    CHECK(field_g(one, 0.0, kHalf) == 1.0);

    const auto two = symmetric_pair();
    CHECK(field_g(two, 0.0, kHalf) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));

    std::mt19937 gen(11);
    for (int it = 0; it < 20; ++it) {
        const auto ens = oracle::random_ensemble(gen, 1 + it * 7 % 40);
        std::uniform_real_distribution<double> xs(-30.0, 30.0);
        for (int k = 0; k < 10; ++k) CHECK(field_g(ens, xs(gen), kHalf) > 0.0);
    }
}

TEST_CASE("field_g and field_h integrate to 2*nu and 0") {
    std::mt19937 gen(23);
    const auto ens = oracle::random_ensemble(gen, 7, -2.0, 2.0);
    for (double nu : {0.3, 0.5, 1.0}) {
        const KernelParams p{nu, 1.0};
        const double a = ens.positions.front() - 20.0 * nu;
        const double b = ens.positions.back() + 20.0 * nu;
        const double ig =
            oracle::trapezoid([&](double x) { return field_g(ens, x, p); }, a, b, 400000);
        CHECK(ig == doctest::Approx(2.0 * nu).epsilon(1e-6));
        const double ih =
            oracle::trapezoid([&](double x) { return field_h(ens, x, p); }, a, b, 400000);
        CHECK(std::abs(ih) < 1e-6);
    }
}

TEST_CASE("field_h: closed form, parity, drift identity") {
    const auto one = single_at_origin();
    CHECK(field_h(one, 0.5, kHalf) == doctest::Approx(0.18393972058572117).epsilon(1e-15));
    for (double u : {0.2, 0.9, 2.4})
        CHECK(field_h(one, u, kHalf) == doctest::Approx(-field_h(one, -u, kHalf)).epsilon(1e-14));

    CHECK(field_h(symmetric_pair(), 0.0, kHalf) == 0.0);

    // -h(X_i)/g(X_i) is the velocity of particle i
    std::mt19937 gen(31);
    for (int it = 0; it < 10; ++it) {
        const auto ens = oracle::random_ensemble(gen, 2 + it * 13 % 60);
        const auto v = velocity_naive(ens, kHalf);
        double scale = 0.0;
        for (double vi : v) scale = std::max(scale, std::abs(vi));
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const double ratio = -field_h(ens, ens.positions[i], kHalf) /
                                 field_g(ens, ens.positions[i], kHalf);
            CHECK(std::abs(ratio * kHalf.alpha - v[i]) <= 1e-12 * std::max(scale, 1e-30));
        }
    }
}

TEST_CASE("field_H: quadrature oracle, sign, decay, derivative") {
    const auto one = single_at_origin();
    // H(0) = integral of h from -inf; quadrature of the closed-form h
    const double quad = oracle::simpson_fixed(
        [&](double s) { return field_h(one, s, kHalf); }, -14.0, 0.0, 200000);
    CHECK(field_H(one, 0.0, kHalf) == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(quad == doctest::Approx(field_H(one, 0.0, kHalf)).epsilon(1e-9));

    // exponential decay; the envelope value at 20*nu is 1.082e-8, below 1e-8
    // from 21*nu on
    const double nu = kHalf.nu;
    CHECK(std::abs(field_H(one, 20.0 * nu, kHalf)) < 2e-8);
    CHECK(std::abs(field_H(one, -20.0 * nu, kHalf)) < 2e-8);
    CHECK(std::abs(field_H(one, 21.0 * nu, kHalf)) < 1e-8);
    for (double x : {-12.0, -10.5, 10.5, 12.0}) {
        const double env = std::exp(-std::abs(x) / nu) * nu * (std::abs(x) + nu);
        CHECK(std::abs(field_H(one, x, kHalf)) <= env * (1.0 + 1e-12));
    }

    // H is nonpositive for any ensemble
    std::mt19937 gen(41);
    const auto ens = oracle::random_ensemble(gen, 9, -3.0, 3.0);
    for (double x = -5.0; x <= 5.0; x += 0.25) CHECK(field_H(ens, x, kHalf) <= 0.0);

    // central difference of H reproduces h at second order
    double prev_err = 0.0;
    for (double delta : {1e-3, 5e-4}) {
        double err = 0.0;
        for (double x : {-1.7, -0.4, 0.3, 1.1}) {
            const double dH =
                (field_H(ens, x + delta, kHalf) - field_H(ens, x - delta, kHalf)) / (2.0 * delta);
            err = std::max(err, std::abs(dH - field_h(ens, x, kHalf)));
        }
        if (prev_err > 0.0) CHECK(prev_err / err > 3.5);
        prev_err = err;
    }
}

TEST_CASE("concentration: closed form equals integral of g^2") {
    const auto one = single_at_origin();
    CHECK(concentration(one, kHalf) == doctest::Approx(0.5).epsilon(1e-15));

    const auto two = symmetric_pair();
    CHECK(concentration(two, kHalf) == doctest::Approx(0.27289454861091772).epsilon(1e-14));
    CHECK(concentration(two, kHalf) == doctest::Approx(0.25 + 1.25 * std::exp(-4.0)).epsilon(1e-15));

    // quadrature oracle on refined grids
    std::mt19937 gen(53);
    const auto ens = oracle::random_ensemble(gen, 6, -2.0, 2.0);
    const double a = ens.positions.front() - 20.0 * kHalf.nu;
    const double b = ens.positions.back() + 20.0 * kHalf.nu;
    double prev_err = 1e300;
    for (int n : {100000, 200000, 400000}) {
        const double quad = oracle::trapezoid(
            [&](double x) { const double g = field_g(ens, x, kHalf); return g * g; }, a, b, n);
        const double err = std::abs(quad - concentration(ens, kHalf));
        CHECK(err <= prev_err * 1.01);
        prev_err = err;
    }
    CHECK(prev_err < 1e-8);

    // consensus limit: all mass at one point gives nu * (total weight)^2
    CHECK(concentration(make_ensemble({3.7}, {1.0}), kHalf) == doctest::Approx(0.5).epsilon(1e-15));

    // pairwise mode agrees with the ordered default
    CHECK(concentration(ens, kHalf, SumMode::pairwise) ==
          doctest::Approx(concentration(ens, kHalf)).epsilon(1e-13));
}

TEST_CASE("translation equivariance") {
    std::mt19937 gen(61);
    const auto ens = oracle::random_ensemble(gen, 12, -4.0, 4.0);
    const double shift = 2.5;
    auto moved = ens;
    for (double& x : moved.positions) x += shift;
    for (double x : {-3.0, -0.5, 0.9, 2.2}) {
        CHECK(field_g(moved, x + shift, kHalf) ==
              doctest::Approx(field_g(ens, x, kHalf)).epsilon(1e-12));
        CHECK(field_h(moved, x + shift, kHalf) ==
              doctest::Approx(field_h(ens, x, kHalf)).epsilon(1e-12));
        CHECK(field_H(moved, x + shift, kHalf) ==
              doctest::Approx(field_H(ens, x, kHalf)).epsilon(1e-12));
    }
    CHECK(concentration(moved, kHalf) ==
          doctest::Approx(concentration(ens, kHalf)).epsilon(1e-12));
}
