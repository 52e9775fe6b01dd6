#pragma once

#include <cfloat>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "hk/dynamics.hpp"
#include "hk/kernel.hpp"
#include "hk/particles.hpp"

namespace hk {

// Uniform truncation of the line; nodes x_j = x_min + j * spacing,
// j = 0 .. n_cells.
struct Grid {
    double x_min = -6.0;
    double x_max = 6.0;
    int n_cells = 2400;

    void validate() const {
        if (!(x_min < x_max)) throw std::invalid_argument("Grid: x_min must be < x_max");
        if (n_cells < 4) throw std::invalid_argument("Grid: need at least 4 cells");
    }
    double spacing() const { return (x_max - x_min) / n_cells; }
    int n_nodes() const { return n_cells + 1; }
    double node(int j) const { return x_min + j * spacing(); }
    std::vector<double> nodes() const {
        std::vector<double> xs(static_cast<std::size_t>(n_nodes()));
        for (int j = 0; j < n_nodes(); ++j) xs[static_cast<std::size_t>(j)] = node(j);
        return xs;
    }
};

// f, g, h, H sampled on the grid nodes; empty vectors mark absent fields.
struct FieldTable {
    Grid grid;
    std::vector<double> f, g, h, H;
};

// Thomas algorithm. The systems here are strictly diagonally dominant, so no
// pivoting is needed.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub,
                                             std::span<const double> diag,
                                             std::span<const double> sup,
                                             std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || sub.size() != n - 1 || sup.size() != n - 1 || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: inconsistent sizes");
    std::vector<double> c(n - 1), d(n);
    double beta = diag[0];
    d[0] = rhs[0] / beta;
    for (std::size_t i = 1; i < n; ++i) {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i - 1];
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
}

namespace detail {

// Solves -u'' + u/nu^2 = rhs with homogeneous Dirichlet values at the
// truncated endpoints, second-order central differences on the interior.
inline std::vector<double> helmholtz_dirichlet(const Grid& grid, std::span<const double> rhs,
                                               double nu) {
    const int nn = grid.n_nodes();
    const double delta = grid.spacing();
    const double off = -1.0 / (delta * delta);
    const double mid = 2.0 / (delta * delta) + 1.0 / (nu * nu);
    const std::size_t m = static_cast<std::size_t>(nn - 2);
    std::vector<double> sub(m - 1, off), diag(m, mid), sup(m - 1, off), b(m);
    for (std::size_t j = 0; j < m; ++j) b[j] = rhs[j + 1];
    const auto interior = solve_tridiagonal(sub, diag, sup, b);
    std::vector<double> u(static_cast<std::size_t>(nn), 0.0);
    for (std::size_t j = 0; j < m; ++j) u[j + 1] = interior[j];
    return u;
}

// Second-order first derivative on the grid: central in the interior,
// one-sided three-point stencils at the ends.
inline std::vector<double> derivative(const Grid& grid, std::span<const double> u) {
    const std::size_t n = u.size();
    const double delta = grid.spacing();
    std::vector<double> du(n);
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * delta);
    for (std::size_t j = 1; j + 1 < n; ++j) du[j] = (u[j + 1] - u[j - 1]) / (2.0 * delta);
    du[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * delta);
    return du;
}

inline double interp_linear(const Grid& grid, std::span<const double> u, double x) {
    const double delta = grid.spacing();
    const double s = (x - grid.x_min) / delta;
    if (s < 0.0 || s > grid.n_cells)
        throw std::invalid_argument("interp_linear: point outside grid");
    std::size_t j = static_cast<std::size_t>(s);
    if (j >= static_cast<std::size_t>(grid.n_cells)) j = static_cast<std::size_t>(grid.n_cells) - 1;
    const double t = s - static_cast<double>(j);
    return (1.0 - t) * u[j] + t * u[j + 1];
}

}  // namespace detail

// Mollified particle density sampled on the grid.
inline FieldTable sample_density(const Grid& grid, const ParticleEnsemble& ens, double sigma) {
    grid.validate();
    FieldTable t;
    t.grid = grid;
    t.f = mollify(ens, sigma, grid.nodes());
    return t;
}

// -g'' + g/nu^2 = (2/nu) f
inline FieldTable solve_bvp_g(FieldTable t, const KernelParams& p) {
    p.validate();
    t.grid.validate();
    if (t.f.size() != static_cast<std::size_t>(t.grid.n_nodes()))
        throw std::invalid_argument("solve_bvp_g: table has no density f on this grid");
    std::vector<double> rhs(t.f.size());
    for (std::size_t j = 0; j < t.f.size(); ++j) rhs[j] = (2.0 / p.nu) * t.f[j];
    t.g = detail::helmholtz_dirichlet(t.grid, rhs, p.nu);
    return t;
}

// -h'' + h/nu^2 = -2 g'
inline FieldTable solve_bvp_h(FieldTable t, const KernelParams& p) {
    p.validate();
    t.grid.validate();
    if (t.g.size() != static_cast<std::size_t>(t.grid.n_nodes()))
        throw std::invalid_argument("solve_bvp_h: table has no g on this grid");
    auto gx = detail::derivative(t.grid, t.g);
    for (double& v : gx) v *= -2.0;
    t.h = detail::helmholtz_dirichlet(t.grid, gx, p.nu);
    return t;
}

// -H'' + H/nu^2 = -2 g
inline FieldTable solve_bvp_H(FieldTable t, const KernelParams& p) {
    p.validate();
    t.grid.validate();
    if (t.g.size() != static_cast<std::size_t>(t.grid.n_nodes()))
        throw std::invalid_argument("solve_bvp_H: table has no g on this grid");
    std::vector<double> rhs(t.g.size());
    for (std::size_t j = 0; j < t.g.size(); ++j) rhs[j] = -2.0 * t.g[j];
    t.H = detail::helmholtz_dirichlet(t.grid, rhs, p.nu);
    return t;
}

// Drift velocity -h/g at the particle positions, with h and g obtained from
// the mollified-density BVP solves on the given grid.
inline std::vector<double> bvp_velocity_at_particles(const ParticleEnsemble& ens,
                                                     const KernelParams& p, const Grid& grid,
                                                     double sigma) {
    auto table = solve_bvp_h(solve_bvp_g(sample_density(grid, ens, sigma), p), p);
    std::vector<double> v(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double hi = detail::interp_linear(grid, table.h, ens.positions[i]);
        const double gi = detail::interp_linear(grid, table.g, ens.positions[i]);
        v[i] = -p.alpha * hi / gi;
    }
    return v;
}

struct VelocityConsistencyReport {
    // Sup-norm deviations from the particle velocity law, with the velocity
    // sup-norm alongside for relative reading. Route (a) is an algebraic
    // identity and agrees to rounding; route (b) carries the mollification
    // and grid biases, O(sigma^2) + O(delta^2).
    double max_dev_closed_form = 0.0;  // route (a): exact fields -h(X_i)/g(X_i)
    double max_dev_bvp = 0.0;          // route (b): BVP solves on mollified f
    double velocity_scale = 0.0;       // max_i |v_i|
};

inline VelocityConsistencyReport check_velocity_consistency(const ParticleEnsemble& ens,
                                                            const KernelParams& p,
                                                            const Grid& grid, double sigma) {
    const auto v = velocity_naive(ens, p);
    VelocityConsistencyReport rep;
    for (double vi : v) rep.velocity_scale = std::max(rep.velocity_scale, std::abs(vi));
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const double va = -p.alpha * field_h(ens, ens.positions[i], p) /
                          field_g(ens, ens.positions[i], p);
        rep.max_dev_closed_form = std::max(rep.max_dev_closed_form, std::abs(va - v[i]));
    }
    const auto vb = bvp_velocity_at_particles(ens, p, grid, sigma);
    for (std::size_t i = 0; i < ens.size(); ++i)
        rep.max_dev_bvp = std::max(rep.max_dev_bvp, std::abs(vb[i] - v[i]));
    return rep;
}

struct ConcentrationIdentityReport {
    // Centered d/dt of ||g||^2 against (2/nu) sum_i w_i h(X_i)^2 / g(X_i),
    // over the interior snapshots of a uniformly spaced trajectory.
    double max_rel_mismatch = 0.0;
    bool nondecreasing = true;  // with 1e-10 relative slack per step
    double max_relative_drop = 0.0;
    int interior_count = 0;
};

inline ConcentrationIdentityReport check_concentration_identity(const TrajectoryRecord& traj,
                                                                const KernelParams& p) {
    const std::size_t m = traj.times.size();
    if (m < 2) throw std::invalid_argument("check_concentration_identity: need >= 2 snapshots");
    const double dt0 = traj.times[1] - traj.times[0];
    for (std::size_t k = 0; k + 1 < m; ++k)
        if (std::abs((traj.times[k + 1] - traj.times[k]) - dt0) > 1e-9 * dt0)
            throw std::invalid_argument(
                "check_concentration_identity: snapshots must be uniformly spaced");

    std::vector<double> conc(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
        conc[k] = concentration(traj.snapshots[k], p);
        const auto fields = particle_fields(traj.snapshots[k], p);
        double s = 0.0;
        for (std::size_t i = 0; i < traj.snapshots[k].size(); ++i)
            s += traj.snapshots[k].weights[i] * fields.h[i] * fields.h[i] / fields.g[i];
        rhs[k] = (2.0 / p.nu) * s;
    }
    double rhs_peak = 0.0;
    for (double r : rhs) rhs_peak = std::max(rhs_peak, std::abs(r));

    ConcentrationIdentityReport rep;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const double drop = (conc[k] - conc[k + 1]) / std::max(conc[k], DBL_MIN);
        rep.max_relative_drop = std::max(rep.max_relative_drop, drop);
        if (conc[k + 1] < conc[k] - 1e-10 * conc[k]) rep.nondecreasing = false;
    }
    for (std::size_t k = 1; k + 1 < m; ++k) {
        const double lhs = (conc[k + 1] - conc[k - 1]) / (2.0 * dt0);
        const double denom = std::max({std::abs(rhs[k]), 1e-14 * rhs_peak, DBL_MIN});
        rep.max_rel_mismatch = std::max(rep.max_rel_mismatch, std::abs(lhs - rhs[k]) / denom);
        ++rep.interior_count;
    }
    return rep;
}

}  // namespace hk
