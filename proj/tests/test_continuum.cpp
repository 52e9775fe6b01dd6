#include <doctest.h>

#include <cmath>
#include <vector>

#include "hk/continuum.hpp"
#include "hk/harness.hpp"
#include "support/oracles.hpp"

using namespace hk;

namespace {
const KernelParams kHalf{0.5, 1.0};

double trapezoid_nodes(const Grid& grid, const std::vector<double>& u) {
    double s = 0.0;
    for (int j = 0; j < grid.n_cells; ++j)
        s += 0.5 * (u[static_cast<std::size_t>(j)] + u[static_cast<std::size_t>(j) + 1]);
    return s * grid.spacing();
}

// residual of -u'' + u/nu^2 = rhs on interior nodes
double interior_residual(const Grid& grid, const std::vector<double>& u,
                         const std::vector<double>& rhs, double nu) {
    const double d2 = grid.spacing() * grid.spacing();
    double r = 0.0;
    for (int j = 1; j < grid.n_cells; ++j) {
        const std::size_t k = static_cast<std::size_t>(j);
        const double lhs = (-u[k - 1] + 2.0 * u[k] - u[k + 1]) / d2 + u[k] / (nu * nu);
        r = std::max(r, std::abs(lhs - rhs[k]));
    }
    return r;
}
}  // namespace

TEST_CASE("solve_tridiagonal reproduces a manufactured solution") {
    const std::size_t n = 60;
    std::vector<double> sub(n - 1), diag(n), sup(n - 1), u(n);
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = 4.0 + 0.1 * (i % 5);
        u[i] = std::sin(0.3 * static_cast<double>(i)) + 0.2;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        sub[i] = -1.0 - 0.05 * (i % 3);
        sup[i] = -1.0 + 0.04 * (i % 4);
    }
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = diag[i] * u[i];
        if (i > 0) b[i] += sub[i - 1] * u[i - 1];
        if (i + 1 < n) b[i] += sup[i] * u[i + 1];
    }
    const auto x = solve_tridiagonal(sub, diag, sup, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(u[i]).epsilon(1e-12));

    CHECK_THROWS_AS(solve_tridiagonal(sub, diag, sup, std::vector<double>(n - 1)),
                    std::invalid_argument);
}

TEST_CASE("grid and table validation") {
    CHECK_THROWS_AS((Grid{1.0, -1.0, 100}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Grid{-1.0, 1.0, 3}.validate()), std::invalid_argument);
    FieldTable empty;
    empty.grid = Grid{-6.0, 6.0, 100};
    CHECK_THROWS_AS(solve_bvp_g(empty, kHalf), std::invalid_argument);
    CHECK_THROWS_AS(solve_bvp_h(empty, kHalf), std::invalid_argument);
    CHECK_THROWS_AS(solve_bvp_H(empty, kHalf), std::invalid_argument);
}

TEST_CASE("zero forcing gives identically zero fields") {
    Grid grid{-6.0, 6.0, 240};
    FieldTable t;
    t.grid = grid;
    t.f.assign(static_cast<std::size_t>(grid.n_nodes()), 0.0);
    t = solve_bvp_H(solve_bvp_h(solve_bvp_g(t, kHalf), kHalf), kHalf);
    for (double v : t.g) CHECK(v == 0.0);
    for (double v : t.h) CHECK(v == 0.0);
    for (double v : t.H) CHECK(v == 0.0);
}

TEST_CASE("BVP solves: residual, oracle error, and observed order") {
    const auto one = make_ensemble({0.0}, {1.0});
    const double sigma = 0.1;

    double prev_g = 0.0, prev_h = 0.0, prev_H = 0.0;
    for (int nc : {1200, 2400, 4800}) {
        Grid grid{-6.0, 6.0, nc};
        auto t = solve_bvp_H(solve_bvp_h(solve_bvp_g(sample_density(grid, one, sigma), kHalf),
                                         kHalf), kHalf);

        // discrete residual of the g system
        std::vector<double> rhs(t.f.size());
        double rhs_scale = 0.0;
        for (std::size_t j = 0; j < t.f.size(); ++j) {
            rhs[j] = (2.0 / kHalf.nu) * t.f[j];
            rhs_scale = std::max(rhs_scale, std::abs(rhs[j]));
        }
        CHECK(interior_residual(grid, t.g, rhs, kHalf.nu) <= 1e-10 * rhs_scale);

        // interior errors against the error-function convolution oracle
        double eg = 0.0, eh = 0.0;
        for (int j = 0; j <= nc; ++j) {
            const double x = grid.node(j);
            if (std::abs(x) > 3.0) continue;
            eg = std::max(eg, std::abs(t.g[static_cast<std::size_t>(j)] -
                                       oracle::mollified_g(one, x, kHalf.nu, sigma)));
            eh = std::max(eh, std::abs(t.h[static_cast<std::size_t>(j)] -
                                       oracle::mollified_h(one, x, kHalf.nu, sigma)));
        }
        // H at the center against quadrature of the oracle h
        const double Hq = oracle::simpson_fixed(
            [&](double s) { return oracle::mollified_h(one, s, kHalf.nu, sigma); }, -14.0, 0.0,
            200000);
        const double eH = std::abs(t.H[static_cast<std::size_t>(nc / 2)] - Hq);

        if (prev_g > 0.0) {
            CHECK(std::log2(prev_g / eg) >= 1.9);
            CHECK(std::log2(prev_h / eh) >= 1.9);
            CHECK(std::log2(prev_H / eH) >= 1.9);
        }
        prev_g = eg;
        prev_h = eh;
        prev_H = eH;

        // H is nonpositive; its derivative reproduces h
        double h_scale = 0.0, H_scale = 0.0;
        for (double v : t.h) h_scale = std::max(h_scale, std::abs(v));
        for (double v : t.H) H_scale = std::max(H_scale, std::abs(v));
        for (double v : t.H) CHECK(v <= 1e-12 * H_scale);
        const auto dH = detail::derivative(grid, t.H);
        double ed = 0.0;
        for (int j = nc / 4; j <= 3 * nc / 4; ++j)
            ed = std::max(ed, std::abs(dH[static_cast<std::size_t>(j)] -
                                       t.h[static_cast<std::size_t>(j)]));
        CHECK(ed <= 1e-6 * std::max(h_scale, 1.0));

        // integral identities: trapezoid of g -> 2 nu * (mass in domain), h -> 0
        const double mass_f = trapezoid_nodes(grid, t.f);
        CHECK(std::abs(trapezoid_nodes(grid, t.g) - 2.0 * kHalf.nu * mass_f) < 3e-5);
        CHECK(std::abs(trapezoid_nodes(grid, t.h)) < 1e-9);
    }
    CHECK(prev_g < 1e-5);  // measured 5.8e-6 at delta = 0.0025
}

TEST_CASE("BVP solves: even density gives odd h") {
    const auto pair = make_ensemble({-1.0, 1.0}, {0.5, 0.5});
    Grid grid{-8.0, 8.0, 3200};
    const auto t = solve_bvp_h(solve_bvp_g(sample_density(grid, pair, 0.1), kHalf), kHalf);
    double dev = 0.0;
    for (int j = 0; j <= 1600; ++j)
        dev = std::max(dev, std::abs(t.h[static_cast<std::size_t>(j)] +
                                     t.h[static_cast<std::size_t>(3200 - j)]));
    CHECK(dev < 1e-10);
}

TEST_CASE("BVP solves: self-convergence under grid halving") {
    const auto ens = build_preset_ensemble(preset("three_bump"));
    const KernelParams p = preset("three_bump").sim.kernel;
    const double sigma = 0.1;
    std::vector<FieldTable> tables;
    for (int nc : {600, 1200, 2400})
        tables.push_back(solve_bvp_H(
            solve_bvp_h(solve_bvp_g(sample_density(Grid{-6.0, 6.0, nc}, ens, sigma), p), p), p));
    auto diff_on_coarse = [&](const std::vector<double>& coarse, const std::vector<double>& fine,
                              int coarse_cells) {
        double d = 0.0;
        for (int j = 0; j <= coarse_cells; ++j)
            d = std::max(d, std::abs(coarse[static_cast<std::size_t>(j)] -
                                     fine[static_cast<std::size_t>(2 * j)]));
        return d;
    };
    for (auto field : {&FieldTable::g, &FieldTable::h, &FieldTable::H}) {
        const double d01 = diff_on_coarse(tables[0].*field, tables[1].*field, 600);
        const double d12 = diff_on_coarse(tables[1].*field, tables[2].*field, 1200);
        CHECK(std::log2(d01 / d12) >= 1.9);
    }
}

TEST_CASE("endpoint truncation: widening the domain barely moves the interior") {
    const auto one = make_ensemble({0.0}, {1.0});
    const Grid narrow{-10.0, 10.0, 2000};  // endpoints 10 = 20 nu from the mass
    const Grid wide{-20.0, 20.0, 4000};    // same spacing, doubled width
    const auto tn = solve_bvp_g(sample_density(narrow, one, 0.1), kHalf);
    const auto tw = solve_bvp_g(sample_density(wide, one, 0.1), kHalf);
    double dev = 0.0;
    for (int j = 0; j <= narrow.n_cells; ++j) {
        const double x = narrow.node(j);
        if (std::abs(x) > 3.0) continue;
        dev = std::max(dev, std::abs(tn.g[static_cast<std::size_t>(j)] -
                                     tw.g[static_cast<std::size_t>(j + 1000)]));
    }
    CHECK(dev < 1e-8);
}

TEST_CASE("velocity consistency: the closed-form route is an identity") {
    const Grid grid{-6.0, 6.0, 2400};
    const auto two = make_ensemble({-1.0, 1.0}, {0.5, 0.5});
    const auto rep = check_velocity_consistency(two, kHalf, grid, 0.1);
    CHECK(rep.max_dev_closed_form <= 1e-12 * rep.velocity_scale);

    const auto one = make_ensemble({0.0}, {1.0});
    const auto rep1 = check_velocity_consistency(one, kHalf, grid, 0.1);
    CHECK(rep1.velocity_scale == 0.0);
    CHECK(rep1.max_dev_closed_form == 0.0);
    CHECK(rep1.max_dev_bvp < 1e-9);
}

TEST_CASE("velocity consistency: the BVP route converges to the mollified law") {
    const auto ens = build_preset_ensemble(preset("three_bump"));
    const KernelParams p = preset("three_bump").sim.kernel;
    const double sigma = 0.1;

    double prev = 0.0;
    for (int nc : {1200, 2400, 4800}) {
        const auto vb = bvp_velocity_at_particles(ens, p, Grid{-6.0, 6.0, nc}, sigma);
        double dev_oracle = 0.0;
        for (std::size_t i = 0; i < ens.size(); ++i) {
            const double x = ens.positions[i];
            const double vm = -p.alpha * oracle::mollified_h(ens, x, p.nu, sigma) /
                              oracle::mollified_g(ens, x, p.nu, sigma);
            dev_oracle = std::max(dev_oracle, std::abs(vb[i] - vm));
        }
        if (prev > 0.0) CHECK(std::log2(prev / dev_oracle) >= 1.9);
        prev = dev_oracle;
    }

    // deviation from the particle law itself is the O(sigma^2) mollification
    // bias; measured 5.0e-2 at nu = 0.2, sigma = 0.1
    const auto rep = check_velocity_consistency(ens, p, Grid{-6.0, 6.0, 2400}, sigma);
    CHECK(rep.max_dev_bvp < 0.1);
    CHECK(rep.max_dev_closed_form <= 1e-12 * rep.velocity_scale);
}

TEST_CASE("concentration identity: stationary state and two-particle accuracy") {
    // single atom: both sides vanish and the series is flat
    SimulationConfig flat;
    flat.kernel = kHalf;
    flat.dt = 0.05;
    flat.t_end = 0.2;
    flat.snapshot_times = {0.0, 0.05, 0.1, 0.15, 0.2};
    const auto atom_traj = simulate(make_ensemble({0.7}, {1.0}), flat);
    const auto flat_rep = check_concentration_identity(atom_traj, kHalf);
    CHECK(flat_rep.max_rel_mismatch == 0.0);
    CHECK(flat_rep.nondecreasing);

    // two particles, fine steps: mismatch is pure time-discretization error
    SimulationConfig cfg;
    cfg.kernel = kHalf;
    cfg.dt = 0.001;
    cfg.t_end = 1.0;
    for (int k = 0; k <= 1000; ++k) cfg.snapshot_times.push_back(0.001 * k);
    const auto traj = simulate(make_ensemble({-1.0, 1.0}, {0.5, 0.5}), cfg);
    const auto rep = check_concentration_identity(traj, kHalf);
    CHECK(rep.nondecreasing);
    CHECK(rep.max_rel_mismatch < 5e-8);  // measured 1.03e-6 at dt = 0.01, O(dt^2)

    // non-uniform snapshot spacing is rejected
    SimulationConfig bad = cfg;
    bad.snapshot_times = {0.0, 0.1, 0.15};
    const auto bad_traj = simulate(make_ensemble({-1.0, 1.0}, {0.5, 0.5}), bad);
    CHECK_THROWS_AS(check_concentration_identity(bad_traj, kHalf), std::invalid_argument);
}
