// hkdyn: simulate continuous bounded-confidence opinion dynamics with the
// weighted particle method, run the refinement studies, and verify the
// differential formulation. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure, 4 verification failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hk/continuum.hpp"
#include "hk/dynamics.hpp"
#include "hk/harness.hpp"
#include "hk/io.hpp"
#include "hk/kernel.hpp"
#include "hk/particles.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct OutputGrid {
    double x_min = -3.0;
    double x_max = 3.0;
    double dx_out = 0.01;

    std::vector<double> points() const {
        if (!(dx_out > 0.0) || !(x_min < x_max))
            throw std::invalid_argument("output grid: need x_min < x_max and dx_out > 0");
        const long n = std::lround((x_max - x_min) / dx_out);
        std::vector<double> xs;
        xs.reserve(static_cast<std::size_t>(n) + 1);
        for (long k = 0; k <= n; ++k) xs.push_back(x_min + static_cast<double>(k) * dx_out);
        return xs;
    }
};

struct SimulateArgs {
    std::string preset_name;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<double> nu, alpha, dt, t_end, sigma, dx, gap_threshold;
    std::optional<int> m;
    std::vector<double> snapshots;
    bool exact_weights = false;
    bool naive = false;
    bool fast = false;
    bool deterministic = false;
};

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return f;
}

hk::Preset resolve_run(const SimulateArgs& a) {
    hk::Preset pr;
    bool have_base = false;
    json cfg;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw std::invalid_argument("cannot read config file " + a.config_path);
        in >> cfg;
    }
    std::string preset_name = a.preset_name;
    if (preset_name.empty() && cfg.contains("preset"))
        preset_name = cfg["preset"].get<std::string>();
    if (!preset_name.empty()) {
        pr = hk::preset(preset_name);
        have_base = true;
    }
    if (cfg.contains("density")) {
        hk::DensitySpec spec;
        for (const auto& c : cfg["density"]["components"])
            spec.components.push_back({c["weight"].get<double>(), c["mean"].get<double>(),
                                       c["variance"].get<double>()});
        spec.validate();
        pr.density = spec;
        pr.name = "custom";
        have_base = true;
    }
    if (!have_base)
        throw std::invalid_argument("simulate: need --preset, or a config with a density");

    auto num = [&](const char* key, double& slot) {
        if (cfg.contains(key)) slot = cfg[key].get<double>();
    };
    num("nu", pr.sim.kernel.nu);
    num("alpha", pr.sim.kernel.alpha);
    num("dt", pr.sim.dt);
    num("t_end", pr.sim.t_end);
    num("sigma", pr.sim.sigma);
    num("dx", pr.dx);
    num("gap_threshold", pr.sim.diag.gap_threshold);
    if (cfg.contains("m")) pr.m = cfg["m"].get<int>();
    if (cfg.contains("exact_weights") && cfg["exact_weights"].get<bool>())
        pr.rule = hk::WeightRule::exact;
    if (cfg.contains("fast_path")) pr.sim.fast_path = cfg["fast_path"].get<bool>();
    if (cfg.contains("snapshot_times"))
        pr.sim.snapshot_times = cfg["snapshot_times"].get<std::vector<double>>();
    if (cfg.contains("intervals")) {
        pr.sim.diag.intervals.clear();
        for (const auto& ab : cfg["intervals"])
            pr.sim.diag.intervals.push_back({ab[0].get<double>(), ab[1].get<double>()});
    }

    if (a.nu) pr.sim.kernel.nu = *a.nu;
    if (a.alpha) pr.sim.kernel.alpha = *a.alpha;
    if (a.dt) pr.sim.dt = *a.dt;
    if (a.t_end) pr.sim.t_end = *a.t_end;
    if (a.sigma) pr.sim.sigma = *a.sigma;
    if (a.dx) pr.dx = *a.dx;
    if (a.m) pr.m = *a.m;
    if (a.gap_threshold) pr.sim.diag.gap_threshold = *a.gap_threshold;
    if (!a.snapshots.empty()) pr.sim.snapshot_times = a.snapshots;
    if (a.exact_weights) pr.rule = hk::WeightRule::exact;
    if (a.naive) pr.sim.fast_path = false;
    if (a.fast) pr.sim.fast_path = true;

    // the horizon may have been shortened past preset snapshot times
    std::vector<double> kept;
    for (double s : pr.sim.snapshot_times)
        if (s <= pr.sim.t_end + 1e-9) kept.push_back(s);
    pr.sim.snapshot_times = kept;

    pr.sim.kernel.validate();
    if (pr.m < 1 || !(pr.dx > 0.0))
        throw std::invalid_argument("simulate: need m >= 1 and dx > 0");
    return pr;
}

OutputGrid resolve_out_grid(const std::string& config_path) {
    OutputGrid g;
    if (config_path.empty()) return g;
    std::ifstream in(config_path);
    if (!in) return g;
    json cfg;
    in >> cfg;
    if (cfg.contains("out_grid")) {
        const auto& og = cfg["out_grid"];
        if (og.contains("x_min")) g.x_min = og["x_min"].get<double>();
        if (og.contains("x_max")) g.x_max = og["x_max"].get<double>();
        if (og.contains("dx_out")) g.dx_out = og["dx_out"].get<double>();
    }
    return g;
}

int do_simulate(const SimulateArgs& a) {
    const hk::Preset pr = resolve_run(a);
    const OutputGrid og = resolve_out_grid(a.config_path);
    const auto grid = og.points();

    const auto disc = hk::discretize(pr.density, pr.m, pr.dx, pr.rule);
    const auto traj = hk::simulate(disc.ensemble, pr.sim);

    const fs::path out(a.out_dir);
    fs::create_directories(out);
    {
        auto f = open_out(out / "snapshots.csv");
        hk::write_snapshots_csv(f, traj, grid, pr.sim.sigma);
    }
    {
        auto f = open_out(out / "particles.csv");
        hk::write_particles_csv(f, traj);
    }
    {
        auto f = open_out(out / "diagnostics.csv");
        hk::write_diagnostics_csv(f, traj);
    }
    json meta;
    meta["command"] = "simulate";
    meta["preset"] = pr.name;
    meta["nu"] = pr.sim.kernel.nu;
    meta["alpha"] = pr.sim.kernel.alpha;
    meta["dt"] = pr.sim.dt;
    meta["t_end"] = pr.sim.t_end;
    meta["sigma"] = pr.sim.sigma;
    meta["m"] = pr.m;
    meta["dx"] = pr.dx;
    meta["weight_rule"] = pr.rule == hk::WeightRule::exact ? "exact" : "midpoint";
    meta["fast_path"] = pr.sim.fast_path;
    meta["deterministic"] = true;  // reductions always run in index order
    meta["n_particles"] = disc.ensemble.size();
    meta["raw_weight_sum"] = disc.raw_weight_sum;
    meta["truncated_mass"] = 1.0 - disc.raw_weight_sum;
    meta["dropped_cells"] = disc.dropped;
    meta["resort_count"] = traj.resort_count;
    meta["requested_snapshot_times"] = traj.requested_times;
    meta["actual_snapshot_times"] = traj.times;
    meta["output_grid"] = {{"x_min", og.x_min}, {"x_max", og.x_max}, {"dx_out", og.dx_out}};
    {
        auto f = open_out(out / "run_meta.json");
        f << meta.dump(2) << '\n';
    }
    return 0;
}

struct ConvergeArgs {
    std::string study;
    std::string out_dir = ".";
    int levels = 5;
    std::vector<double> dts;
    std::vector<double> dxs;
};

json report_to_json(const hk::ConvergenceReport& rep) {
    json j;
    j["study"] = std::string(1, rep.study);
    j["preset"] = rep.preset_name;
    j["nu"] = rep.nu;
    j["sigma"] = rep.sigma;
    j["t_end"] = rep.t_end;
    j["comparison_grid"] = rep.grid_note;
    j["rows"] = json::array();
    for (const auto& row : rep.rows) {
        json r;
        r["dx"] = row.dx;
        r["dt"] = row.dt;
        r["error"] = row.error;
        if (std::isfinite(row.ratio))
            r["ratio"] = row.ratio;
        else
            r["ratio"] = nullptr;
        j["rows"].push_back(r);
    }
    return j;
}

int do_converge(const ConvergeArgs& a) {
    hk::ConvergenceReport rep;
    if (a.study == "E") {
        if (a.levels < 2) throw std::invalid_argument("converge: need at least 2 levels");
        rep = hk::study_E(hk::default_levels_E(a.levels));
    } else if (a.study == "F") {
        rep = hk::study_F(a.dts.empty() ? std::vector<double>{0.1, 0.05, 0.025, 0.0125} : a.dts);
    } else if (a.study == "G") {
        rep = hk::study_G(a.dxs.empty() ? std::vector<double>{0.06, 0.03, 0.015, 0.0075} : a.dxs);
    } else {
        throw std::invalid_argument("converge: --study must be E, F, or G");
    }

    const fs::path out(a.out_dir);
    fs::create_directories(out);
    const std::string base = std::string("report_") + rep.study;
    {
        auto f = open_out(out / (base + ".csv"));
        hk::write_report_csv(f, rep);
    }
    {
        auto f = open_out(out / (base + ".json"));
        f << report_to_json(rep).dump(2) << '\n';
    }
    for (const auto& row : rep.rows)
        if (std::isfinite(row.ratio)) std::cout << hk::fmt17(row.ratio) << '\n';
    return 0;
}

struct VerifyArgs {
    std::string out_dir = ".";
    double delta = 0.1;
};

struct Check {
    std::string name;
    bool pass;
    double measured;
    double threshold;
    std::string relation;
};

int do_verify(const VerifyArgs& a) {
    if (!(a.delta > 0.0) || a.delta > 1.0)
        throw std::invalid_argument("verify: --delta must be in (0, 1]");
    std::vector<Check> checks;
    const hk::KernelParams p_two{0.5, 1.0};
    const auto two = hk::make_ensemble({-1.0, 1.0}, {0.5, 0.5});
    const auto pr3 = hk::preset("three_bump");
    const auto three = hk::build_preset_ensemble(pr3);
    const hk::KernelParams p_three = pr3.sim.kernel;
    const double sigma = 0.1;

    // tridiagonal residual of the g system on the base grid
    {
        const int nc = static_cast<int>(std::lround(12.0 / a.delta));
        hk::Grid grid{-6.0, 6.0, nc};
        auto t = hk::solve_bvp_g(hk::sample_density(grid, three, sigma), p_three);
        const double d2 = grid.spacing() * grid.spacing();
        double res = 0.0, scale = 0.0;
        for (int j = 1; j < nc; ++j) {
            const std::size_t k = static_cast<std::size_t>(j);
            const double rhs = (2.0 / p_three.nu) * t.f[k];
            const double lhs = (-t.g[k - 1] + 2.0 * t.g[k] - t.g[k + 1]) / d2 +
                               t.g[k] / (p_three.nu * p_three.nu);
            res = std::max(res, std::abs(lhs - rhs));
            scale = std::max(scale, std::abs(rhs));
        }
        checks.push_back({"tridiagonal_residual", res <= 1e-10 * scale, res, 1e-10 * scale, "<="});
    }

    // self-convergence order of the three solves under grid halving; the
    // finest solve is also exported as fields.csv
    {
        std::vector<hk::FieldTable> tables;
        for (int lvl = 0; lvl < 3; ++lvl) {
            const int nc = static_cast<int>(std::lround(12.0 / a.delta)) << lvl;
            tables.push_back(hk::solve_bvp_H(
                hk::solve_bvp_h(
                    hk::solve_bvp_g(hk::sample_density(hk::Grid{-6.0, 6.0, nc}, three, sigma),
                                    p_three),
                    p_three),
                p_three));
        }
        fs::create_directories(a.out_dir);
        auto f = open_out(fs::path(a.out_dir) / "fields.csv");
        hk::write_fields_csv(f, tables.back());
        auto diff = [&](const std::vector<double>& c, const std::vector<double>& f, int nc) {
            double d = 0.0;
            for (int j = 0; j <= nc; ++j)
                d = std::max(d, std::abs(c[static_cast<std::size_t>(j)] -
                                         f[static_cast<std::size_t>(2 * j)]));
            return d;
        };
        const int nc0 = static_cast<int>(std::lround(12.0 / a.delta));
        const char* names[3] = {"bvp_order_g", "bvp_order_h", "bvp_order_H"};
        std::vector<double> hk::FieldTable::*fields[3] = {&hk::FieldTable::g, &hk::FieldTable::h,
                                                          &hk::FieldTable::H};
        for (int f = 0; f < 3; ++f) {
            const double d01 = diff(tables[0].*fields[f], tables[1].*fields[f], nc0);
            const double d12 = diff(tables[1].*fields[f], tables[2].*fields[f], 2 * nc0);
            const double order = std::log2(d01 / d12);
            checks.push_back({names[f], order >= 1.9, order, 1.9, ">="});
        }
    }

    // velocity route (a): exact fields against the particle law
    {
        const hk::Grid grid{-6.0, 6.0, 2400};
        const auto ra = hk::check_velocity_consistency(two, p_two, grid, sigma);
        const auto rb = hk::check_velocity_consistency(three, p_three, grid, sigma);
        const double rel = std::max(ra.max_dev_closed_form / std::max(ra.velocity_scale, 1e-300),
                                    rb.max_dev_closed_form / std::max(rb.velocity_scale, 1e-300));
        checks.push_back({"velocity_route_exact_fields", rel <= 1e-12, rel, 1e-12, "<="});
        checks.push_back({"velocity_route_bvp_deviation", rb.max_dev_bvp <= 0.1, rb.max_dev_bvp,
                          0.1, "<="});
    }

    // velocity route (b): self-convergence under grid halving
    {
        std::vector<std::vector<double>> vbs;
        for (int lvl = 0; lvl < 3; ++lvl) {
            const int nc = static_cast<int>(std::lround(12.0 / a.delta)) << lvl;
            vbs.push_back(
                hk::bvp_velocity_at_particles(three, p_three, hk::Grid{-6.0, 6.0, nc}, sigma));
        }
        auto sup = [&](const std::vector<double>& x, const std::vector<double>& y) {
            double d = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
            return d;
        };
        const double order = std::log2(sup(vbs[0], vbs[1]) / sup(vbs[1], vbs[2]));
        checks.push_back({"velocity_route_bvp_order", order >= 1.7, order, 1.7, ">="});
    }

    // concentration: nondecreasing along a short preset run, and the identity
    // mismatch refining at second order in dt on the two-particle system
    {
        hk::SimulationConfig cfg = pr3.sim;
        cfg.t_end = 1.0;
        cfg.snapshot_times.clear();
        for (int k = 0; k <= 10; ++k) cfg.snapshot_times.push_back(0.1 * k);
        const auto traj = hk::simulate(three, cfg);
        const auto rep = hk::check_concentration_identity(traj, p_three);
        checks.push_back({"concentration_nondecreasing", rep.nondecreasing,
                          rep.max_relative_drop, 1e-10, "<="});

        double mism[2];
        int idx = 0;
        for (double dt : {0.01, 0.005}) {
            hk::SimulationConfig c2;
            c2.kernel = p_two;
            c2.dt = dt;
            c2.t_end = 1.0;
            const long n = std::lround(1.0 / dt);
            for (long k = 0; k <= n; ++k)
                c2.snapshot_times.push_back(static_cast<double>(k) * dt);
            mism[idx++] = hk::check_concentration_identity(hk::simulate(two, c2), p_two)
                              .max_rel_mismatch;
        }
        const double order = std::log2(mism[0] / mism[1]);
        checks.push_back({"concentration_identity_order", order >= 1.9, order, 1.9, ">="});
    }

    bool all = true;
    json j;
    j["delta"] = a.delta;
    j["checks"] = json::array();
    for (const auto& c : checks) {
        all = all && c.pass;
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " measured=" << hk::fmt17(c.measured)
                  << " " << c.relation << " " << hk::fmt17(c.threshold) << '\n';
        json cj;
        cj["name"] = c.name;
        cj["pass"] = c.pass;
        cj["measured"] = c.measured;
        cj["threshold"] = c.threshold;
        cj["relation"] = c.relation;
        j["checks"].push_back(cj);
    }
    j["all_pass"] = all;
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    {
        auto f = open_out(out / "verify.json");
        f << j.dump(2) << '\n';
    }
    if (!all) {
        for (const auto& c : checks)
            if (!c.pass) std::cerr << "verification failed: " << c.name << '\n';
        return 4;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous Hegselmann-Krause opinion dynamics, weighted particle method"};
    app.require_subcommand(1);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "run a particle simulation and write CSV output");
    sim->add_option("--preset", sa.preset_name, "two_bump | three_bump | convergence_base");
    sim->add_option("--config", sa.config_path, "JSON config file");
    sim->add_option("--nu", sa.nu, "interaction range of eta(z) = exp(-z/nu)");
    sim->add_option("--alpha", sa.alpha, "conformity rate");
    sim->add_option("--dt", sa.dt, "time step");
    sim->add_option("--t-end", sa.t_end, "simulation horizon");
    sim->add_option("--sigma", sa.sigma, "mollifier width for density output");
    sim->add_option("--m", sa.m, "half cell count; 2m-1 particles");
    sim->add_option("--dx", sa.dx, "particle spacing");
    sim->add_option("--snapshots", sa.snapshots, "snapshot times")->delimiter(',');
    sim->add_option("--gap-threshold", sa.gap_threshold, "gap that splits particle segments");
    sim->add_flag("--exact-weights", sa.exact_weights, "integrate cells instead of midpoint rule");
    sim->add_flag("--naive", sa.naive, "use the O(n^2) velocity sum");
    sim->add_flag("--fast", sa.fast, "use the O(n) scan velocity (default)");
    sim->add_flag("--deterministic", sa.deterministic,
                  "ordered reductions (always on; flag kept for scripting)");
    sim->add_option("--out", sa.out_dir, "output directory");

    ConvergeArgs ca;
    auto* con = app.add_subcommand("converge", "run a refinement study and write reports");
    con->add_option("--study", ca.study, "E | F | G")->required();
    con->add_option("--levels", ca.levels, "number of halving levels for study E");
    con->add_option("--dts", ca.dts, "time steps for study F")->delimiter(',');
    con->add_option("--dxs", ca.dxs, "spacings for study G")->delimiter(',');
    con->add_option("--out", ca.out_dir, "output directory");

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "check the differential formulation numerically");
    ver->add_option("--delta", va.delta, "base grid spacing for the solves");
    ver->add_option("--out", va.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return do_simulate(sa);
        if (con->parsed()) return do_converge(ca);
        if (ver->parsed()) return do_verify(va);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
