#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hk/kernel.hpp"
#include "hk/particles.hpp"

namespace hk {

enum class VelocityMode { naive, fast };

// Explicit midpoint is the production integrator; explicit Euler exists as a
// first-order control for the convergence studies.
enum class Integrator { midpoint, euler };

namespace detail {

// Attenuated prefix/suffix scans for the exponential kernel on ascending
// positions. The running sums decay by exp(-(x_i - x_{i-1})/nu) between
// neighbors, so no exp(+x/nu) factor is ever formed and the scan cannot
// overflow regardless of the position span. With g = x_i - x_{i-1}:
//   A_i = sum_{j<=i} w_j exp(-(x_i-x_j)/nu)            A_i = e^{-g/nu} A_{i-1} + w_i
//   P_i = sum_{j<=i} w_j (x_j-x_i) exp(-(x_i-x_j)/nu)  P_i = e^{-g/nu} (P_{i-1} - g A_{i-1})
// and mirrored suffix sums C_i, Q_i from the right. Then the velocity-law
// numerator is P_i + Q_i (same-signed accumulation on each side) and the
// denominator is A_i + C_i - w_i (the self term appears in both scans).
inline void exp_scans(std::span<const double> x, std::span<const double> w, double nu,
                      std::vector<double>& den, std::vector<double>& num) {
    const std::size_t n = x.size();
    den.assign(n, 0.0);
    num.assign(n, 0.0);
    double a = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double gap = x[i] - x[i - 1];
            const double att = std::exp(-gap / nu);
            psum = att * (psum - gap * a);
            a *= att;
        }
        a += w[i];
        den[i] = a;
        num[i] = psum;
    }
    double c = 0.0, qsum = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        if (i + 1 < n) {
            const double gap = x[i + 1] - x[i];
            const double att = std::exp(-gap / nu);
            qsum = att * (qsum + gap * c);
            c *= att;
        }
        c += w[i];
        den[i] += c - w[i];
        num[i] += qsum;
    }
}

inline bool is_ascending(std::span<const double> x) {
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        if (!(x[i] <= x[i + 1])) return false;
    return true;
}

// Velocity of every particle under the conformist law
//   v_i = alpha * sum_j eta(|X_i-X_j|) w_j (X_j-X_i) / sum_l eta(|X_i-X_l|) w_l.
// The denominator is at least w_i > 0, so the ratio is always defined, and
// |v_i| <= alpha * (max X - min X) since the sum is a convex combination of
// displacements.
inline std::vector<double> velocity_core(std::span<const double> x, std::span<const double> w,
                                         const KernelParams& p, VelocityMode mode) {
    const std::size_t n = x.size();
    std::vector<double> v(n);
    if (mode == VelocityMode::naive) {
        for (std::size_t i = 0; i < n; ++i) {
            double numer = 0.0, denom = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(-std::abs(x[i] - x[j]) / p.nu) * w[j];
                numer += e * (x[j] - x[i]);
                denom += e;
            }
            v[i] = p.alpha * numer / denom;
        }
        return v;
    }
    std::vector<double> den, num;
    if (is_ascending(x)) {
        exp_scans(x, w, p.nu, den, num);
        for (std::size_t i = 0; i < n; ++i) v[i] = p.alpha * num[i] / den[i];
        return v;
    }
    // A midpoint stage can hand us unordered positions: evaluate on a sorted
    // view with weights co-permuted, then scatter back.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a_, std::size_t b_) { return x[a_] < x[b_]; });
    std::vector<double> xs(n), ws(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[perm[i]];
        ws[i] = w[perm[i]];
    }
    if (!is_ascending(xs))
        throw std::runtime_error("velocity: positions not sortable (non-finite values?)");
    exp_scans(xs, ws, p.nu, den, num);
    for (std::size_t i = 0; i < n; ++i) v[perm[i]] = p.alpha * num[i] / den[i];
    return v;
}

}  // namespace detail

// Reference O(n^2) evaluation of the velocity law.
inline std::vector<double> velocity_naive(const ParticleEnsemble& ens, const KernelParams& p) {
    return detail::velocity_core(ens.positions, ens.weights, p, VelocityMode::naive);
}

// O(n) evaluation via the attenuated scans; agrees with velocity_naive to
// rounding on sorted ensembles.
inline std::vector<double> velocity_fast(const ParticleEnsemble& ens, const KernelParams& p) {
    return detail::velocity_core(ens.positions, ens.weights, p, VelocityMode::fast);
}

inline std::vector<double> velocity(const ParticleEnsemble& ens, const KernelParams& p,
                                    VelocityMode mode) {
    return detail::velocity_core(ens.positions, ens.weights, p, mode);
}

// g and h evaluated at every particle position in one O(n) pass; h(X_i) is
// minus the unscaled velocity numerator, g(X_i) the denominator.
struct ParticleFieldValues {
    std::vector<double> g;
    std::vector<double> h;
};

inline ParticleFieldValues particle_fields(const ParticleEnsemble& ens, const KernelParams& p) {
    std::vector<double> den, num;
    detail::exp_scans(ens.positions, ens.weights, p.nu, den, num);
    ParticleFieldValues out;
    out.g = std::move(den);
    out.h = std::move(num);
    for (double& hi : out.h) hi = -hi;
    return out;
}

struct StepInfo {
    bool resorted = false;
};

namespace detail {

inline ParticleEnsemble finish_step(const ParticleEnsemble& ens, std::vector<double> moved,
                                    StepInfo* info) {
    for (double xi : moved)
        if (!std::isfinite(xi)) throw std::runtime_error("step: non-finite position");
    ParticleEnsemble out{std::move(moved), ens.weights};
    if (!is_ascending(out.positions)) {
        // The continuous flow never crosses; a discrete inversion is repaired
        // (stable co-permutation of the weights) and reported upward.
        std::vector<std::size_t> perm(out.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
            return out.positions[a] < out.positions[b];
        });
        std::vector<double> xs(out.size()), ws(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            xs[i] = out.positions[perm[i]];
            ws[i] = out.weights[perm[i]];
        }
        out.positions = std::move(xs);
        out.weights = std::move(ws);
        if (info) info->resorted = true;
    }
    return out;
}

}  // namespace detail

// One explicit-midpoint step: k1 = v(X), k2 = v(X + dt/2 k1), X' = X + dt k2.
// Weights are carried over untouched.
inline ParticleEnsemble step_midpoint(const ParticleEnsemble& ens, double dt,
                                      const KernelParams& p,
                                      VelocityMode mode = VelocityMode::fast,
                                      StepInfo* info = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_midpoint: dt must be > 0");
    const std::size_t n = ens.size();
    const auto k1 = detail::velocity_core(ens.positions, ens.weights, p, mode);
    std::vector<double> stage(n);
    for (std::size_t i = 0; i < n; ++i) stage[i] = ens.positions[i] + 0.5 * dt * k1[i];
    const auto k2 = detail::velocity_core(stage, ens.weights, p, mode);
    std::vector<double> moved(n);
    for (std::size_t i = 0; i < n; ++i) moved[i] = ens.positions[i] + dt * k2[i];
    return detail::finish_step(ens, std::move(moved), info);
}

// One explicit-Euler step; first-order control for the study harness only.
inline ParticleEnsemble step_euler(const ParticleEnsemble& ens, double dt, const KernelParams& p,
                                   VelocityMode mode = VelocityMode::fast,
                                   StepInfo* info = nullptr) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_euler: dt must be > 0");
    const auto k1 = detail::velocity_core(ens.positions, ens.weights, p, mode);
    std::vector<double> moved(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) moved[i] = ens.positions[i] + dt * k1[i];
    return detail::finish_step(ens, std::move(moved), info);
}

struct DiagnosticsOptions {
    double gap_threshold = 0.25;  // splits particle runs into segments
    double sigma = 0.1;           // mollifier width for the mode count
    std::vector<std::array<double, 2>> intervals = {{-0.5, 0.5}};
};

struct DiagnosticRecord {
    double min_pos = 0.0;
    double max_pos = 0.0;
    double diameter = 0.0;
    double concentration = 0.0;
    // Clusters counted as local maxima (modes) of the sigma-mollified
    // density; robust at t = 0 where the discretization is still a
    // near-continuum and consecutive gaps carry no information.
    int cluster_count = 0;
    std::vector<double> cluster_centers;
    // Maximal runs of particles whose consecutive gaps stay below
    // gap_threshold; meaningful once the population has split into clumps.
    int gap_segment_count = 0;
    std::vector<double> interval_masses;
};

namespace detail {

inline void count_density_modes(const ParticleEnsemble& ens, double sigma,
                                DiagnosticRecord& rec) {
    const double step = sigma / 10.0;
    const double lo = std::floor((ens.positions.front() - 5.0 * sigma) / step) * step;
    const double hi = ens.positions.back() + 5.0 * sigma;
    const std::size_t npts = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
    std::vector<double> xs(npts);
    for (std::size_t k = 0; k < npts; ++k) xs[k] = lo + static_cast<double>(k) * step;
    const auto y = mollify(ens, sigma, xs);
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, v);
    const double floor_val = 1e-6 * peak;
    for (std::size_t i = 1; i + 1 < y.size();) {
        if (!(y[i] > y[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < y.size() && y[j + 1] == y[j]) ++j;
        if (j + 1 < y.size() && y[j + 1] < y[j] && y[i] >= floor_val) {
            rec.cluster_centers.push_back(xs[(i + j) / 2]);
        }
        i = j + 1;
    }
    rec.cluster_count = static_cast<int>(rec.cluster_centers.size());
}

}  // namespace detail

inline DiagnosticRecord diagnostics(const ParticleEnsemble& ens, const KernelParams& p,
                                    const DiagnosticsOptions& opt = {}) {
    if (ens.size() == 0) throw std::invalid_argument("diagnostics: empty ensemble");
    DiagnosticRecord rec;
    rec.min_pos = ens.positions.front();
    rec.max_pos = ens.positions.back();
    rec.diameter = rec.max_pos - rec.min_pos;
    rec.concentration = concentration(ens, p);
    rec.gap_segment_count = 1;
    for (std::size_t i = 0; i + 1 < ens.size(); ++i)
        if (ens.positions[i + 1] - ens.positions[i] >= opt.gap_threshold)
            ++rec.gap_segment_count;
    detail::count_density_modes(ens, opt.sigma, rec);
    rec.interval_masses.reserve(opt.intervals.size());
    for (const auto& ab : opt.intervals) {
        double mass = 0.0;
        for (std::size_t i = 0; i < ens.size(); ++i)
            if (ens.positions[i] >= ab[0] && ens.positions[i] <= ab[1]) mass += ens.weights[i];
        rec.interval_masses.push_back(mass);
    }
    return rec;
}

struct SimulationConfig {
    KernelParams kernel;
    double dt = 0.04;
    double t_end = 10.0;
    std::vector<double> snapshot_times;  // empty -> {0, t_end}
    bool fast_path = true;
    double sigma = 0.1;
    Integrator integrator = Integrator::midpoint;
    DiagnosticsOptions diag;
};

struct TrajectoryRecord {
    std::vector<double> times;            // actual, on step boundaries
    std::vector<double> requested_times;  // what the config asked for
    std::vector<ParticleEnsemble> snapshots;
    std::vector<DiagnosticRecord> diagnostics;
    int resort_count = 0;
};

// Marches the ensemble to t_end with the configured integrator, recording
// snapshots and diagnostics at the requested times (rounded to the nearest
// step boundary; the requested values are kept alongside the actual ones).
inline TrajectoryRecord simulate(const ParticleEnsemble& ens0, const SimulationConfig& cfg) {
    cfg.kernel.validate();
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (cfg.t_end < 0.0) throw std::invalid_argument("simulate: t_end must be >= 0");
    const long long n_steps = std::llround(cfg.t_end / cfg.dt);
    if (std::abs(static_cast<double>(n_steps) * cfg.dt - cfg.t_end) > 1e-6 * cfg.dt)
        throw std::invalid_argument("simulate: t_end must be an integer number of steps");

    std::vector<double> requested = cfg.snapshot_times;
    if (requested.empty()) {
        requested.push_back(0.0);
        if (cfg.t_end > 0.0) requested.push_back(cfg.t_end);
    }
    std::vector<long long> snap_steps;
    snap_steps.reserve(requested.size());
    for (double s : requested) {
        if (s < 0.0 || s > cfg.t_end + 1e-9 * std::max(1.0, cfg.t_end))
            throw std::invalid_argument("simulate: snapshot time outside [0, t_end]");
        snap_steps.push_back(std::clamp<long long>(std::llround(s / cfg.dt), 0, n_steps));
    }
    std::vector<std::size_t> order(snap_steps.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return snap_steps[a] < snap_steps[b]; });

    const VelocityMode mode = cfg.fast_path ? VelocityMode::fast : VelocityMode::naive;
    DiagnosticsOptions diag = cfg.diag;
    diag.sigma = cfg.sigma;

    TrajectoryRecord rec;
    ParticleEnsemble cur = ens0;
    std::size_t next = 0;
    auto record = [&](long long k) {
        while (next < order.size() && snap_steps[order[next]] == k) {
            rec.times.push_back(static_cast<double>(k) * cfg.dt);
            rec.requested_times.push_back(requested[order[next]]);
            rec.snapshots.push_back(cur);
            rec.diagnostics.push_back(hk::diagnostics(cur, cfg.kernel, diag));
            ++next;
            // collapse duplicates that rounded to the same step
            while (next < order.size() && snap_steps[order[next]] == k) ++next;
        }
    };
    record(0);
    for (long long k = 1; k <= n_steps; ++k) {
        StepInfo info;
        try {
            cur = (cfg.integrator == Integrator::midpoint)
                      ? step_midpoint(cur, cfg.dt, cfg.kernel, mode, &info)
                      : step_euler(cur, cfg.dt, cfg.kernel, mode, &info);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("simulate: failure at step " + std::to_string(k) + ": " +
                                     e.what());
        }
        if (info.resorted) ++rec.resort_count;
        record(k);
    }
    return rec;
}

}  // namespace hk
