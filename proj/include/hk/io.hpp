#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>

#include "hk/continuum.hpp"
#include "hk/dynamics.hpp"
#include "hk/harness.hpp"
#include "hk/particles.hpp"

namespace hk {

// 17 significant digits: enough to round-trip any double exactly, so two
// deterministic runs serialize to identical bytes.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// t,x,f rows: the sigma-mollified density of every snapshot on an output grid.
inline void write_snapshots_csv(std::ostream& os, const TrajectoryRecord& traj,
                                std::span<const double> grid, double sigma) {
    os << "t,x,f\n";
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
        const auto f = mollify(traj.snapshots[s], sigma, grid);
        for (std::size_t k = 0; k < grid.size(); ++k)
            os << fmt17(traj.times[s]) << ',' << fmt17(grid[k]) << ',' << fmt17(f[k]) << '\n';
    }
}

inline void write_particles_csv(std::ostream& os, const TrajectoryRecord& traj) {
    os << "t,index,position,weight\n";
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
        const auto& ens = traj.snapshots[s];
        for (std::size_t i = 0; i < ens.size(); ++i)
            os << fmt17(traj.times[s]) << ',' << i << ',' << fmt17(ens.positions[i]) << ','
               << fmt17(ens.weights[i]) << '\n';
    }
}

inline void write_diagnostics_csv(std::ostream& os, const TrajectoryRecord& traj) {
    os << "t,min,max,diameter,concentration,clusters";
    const std::size_t n_intervals =
        traj.diagnostics.empty() ? 0 : traj.diagnostics.front().interval_masses.size();
    for (std::size_t k = 0; k < n_intervals; ++k) os << ",mass_" << k;
    os << '\n';
    for (std::size_t s = 0; s < traj.diagnostics.size(); ++s) {
        const auto& d = traj.diagnostics[s];
        os << fmt17(traj.times[s]) << ',' << fmt17(d.min_pos) << ',' << fmt17(d.max_pos) << ','
           << fmt17(d.diameter) << ',' << fmt17(d.concentration) << ',' << d.cluster_count;
        for (double mass : d.interval_masses) os << ',' << fmt17(mass);
        os << '\n';
    }
}

// x plus whichever of f, g, h, H the table holds; absent fields leave their
// cells empty.
inline void write_fields_csv(std::ostream& os, const FieldTable& table) {
    os << "x,f,g,h,H\n";
    const std::size_t n = static_cast<std::size_t>(table.grid.n_nodes());
    auto cell = [&](const std::vector<double>& u, std::size_t j) {
        if (u.size() == n) os << fmt17(u[j]);
    };
    for (std::size_t j = 0; j < n; ++j) {
        os << fmt17(table.grid.node(static_cast<int>(j))) << ',';
        cell(table.f, j);
        os << ',';
        cell(table.g, j);
        os << ',';
        cell(table.h, j);
        os << ',';
        cell(table.H, j);
        os << '\n';
    }
}

// dx,dt,error,ratio; the finest row has no next-finer run, so its ratio
// field is left empty.
inline void write_report_csv(std::ostream& os, const ConvergenceReport& rep) {
    os << "dx,dt,error,ratio\n";
    for (const auto& row : rep.rows) {
        os << fmt17(row.dx) << ',' << fmt17(row.dt) << ',' << fmt17(row.error) << ',';
        if (std::isfinite(row.ratio)) os << fmt17(row.ratio);
        os << '\n';
    }
}

}  // namespace hk
