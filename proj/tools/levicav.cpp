// levicav: mode solve, shift maps, calibration, protocol sweeps, fitting and height inversion.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "levicav/calibration.hpp"
#include "levicav/config.hpp"
#include "levicav/experiment.hpp"
#include "levicav/io.hpp"
#include "levicav/mode_solver.hpp"
#include "levicav/perturbation.hpp"
#include "levicav/resonance.hpp"

namespace fs = std::filesystem;
using namespace levicav;

namespace {

struct Common {
    std::string config_path;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool force = false;
};

RunConfig load_config(const Common& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : parse_config(read_text(o.config_path));
    if (o.seed) cfg.noise.seed = *o.seed;
    return cfg;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> v;
    for (const auto& item : detail::split(s, ',')) {
        double d;
        if (!detail::parse_double(item, d)) throw ConfigError(std::string(what) + ": bad number '" + item + "'");
        v.push_back(d);
    }
    return v;
}

std::string tag(double v) {
    std::string s = fmt_double(v);
    std::replace(s.begin(), s.end(), '-', 'm');
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

ModeField solve_configured(const RunConfig& cfg) {
    return solve_bare_mode(cfg.cavity, make_grid(cfg.cavity, cfg.solver.dr, cfg.solver.dz));
}

void write_out(const Common& o, const std::string& name, const std::string& body) {
    write_text(fs::path(o.out) / name, body, o.force);
}

int cmd_mode_solve(const Common& o) {
    const auto cfg = load_config(o);
    validate_geometry(cfg.cavity, cfg.magnet);
    const auto m = solve_configured(cfg);
    const auto split = energy_split(m);
    const auto ev = evanescent_model(m.f0, cfg.cavity, constants(), cfg.solver.beta_mode);
    std::string s = provenance_header("mode-solve", cfg) + "key,value\n";
    s += "f0_hz," + fmt_double(m.f0) + "\n";
    s += "geometry_factor_ohm," + fmt_double(geometry_factor(m)) + "\n";
    s += "max_wall_h_a_per_m," + fmt_double(max_wall_h(m)) + "\n";
    s += "stored_energy_j," + fmt_double(m.stored_energy) + "\n";
    s += "electric_energy_fraction," + fmt_double(split.electric / split.total()) + "\n";
    s += "eigen_residual," + fmt_double(m.eigen_residual) + "\n";
    s += "beta_per_m," + fmt_double(ev.beta) + "\n";
    s += "analytic_estimate_hz," + fmt_double(analytic_coax_estimate(cfg.cavity)) + "\n";
    for (std::size_t i = 0; i < m.higher_frequencies.size(); ++i)
        s += "f" + std::to_string(i + 1) + "_hz," + fmt_double(m.higher_frequencies[i]) + "\n";
    write_out(o, "mode_summary.csv", s);

    std::string f = provenance_header("mode-solve", cfg) + "r_m,z_m,e_r,e_z,h_phi\n";
    for (int j = 0; j < m.grid.nz; ++j)
        for (int i = 0; i < m.grid.nr; ++i) {
            if (!m.is_vacuum(i, j)) continue;
            const double r = (i + 0.5) * m.grid.dr, z = (j + 0.5) * m.grid.dz;
            const auto v = field_at(m, r, z);
            f += fmt_double(r) + "," + fmt_double(z) + "," + fmt_double(v.e_r) + "," + fmt_double(v.e_z) + "," +
                 fmt_double(v.h_phi) + "\n";
        }
    write_out(o, "mode_field.csv", f);
    std::printf("f0 = %.6f GHz, G = %.2f ohm\n", m.f0 / 1e9, geometry_factor(m));
    return 0;
}

int cmd_shift_map(const Common& o, int nx, int nz) {
    const auto cfg = load_config(o);
    validate_geometry(cfg.cavity, cfg.magnet);
    if (nx < 2 || nz < 2) throw ConfigError("shift-map: --nx and --nz must be >= 2");
    const auto m = solve_configured(cfg);
    const double a = cfg.magnet.radius;
    const auto map = shift_map(m, linspace(0.0, cfg.cavity.stub_radius, nx), linspace(a, a + 2.0e-3, nz), a,
                               cfg.solver.perturbation_average);
    write_out(o, "shift_map.csv", provenance_header("shift-map", cfg) + shift_map_csv(map));
    std::printf("max |df|/f0 = %.3e\n", map.max_relative_shift());
    return 0;
}

int cmd_calibrate(const Common& o) {
    const auto cfg = load_config(o);
    validate_geometry(cfg.cavity, cfg.magnet);
    const auto m = solve_configured(cfg);
    const Simulation base = uncalibrated_simulation(cfg, m);
    CalibrationTargets tg;
    tg.magnet_z = cfg.protocol.magnet_z;
    const auto all = calibrate(base, tg);
    const auto& best = all.front();
    if (!best.meets_targets) throw DomainError("calibration: no candidate meets the targets");
    const Simulation sim = apply_calibration(base, best);
    const auto hdr = provenance_header("calibrate", cfg);
    write_out(o, "calibration.csv", hdr + calibration_csv(sim.calib, sim.thermal, physics_hash(cfg)));
    write_out(o, "magnet_curve.csv", hdr + magnet_curve_csv(sim.calib.magnet_curve));
    std::string c = hdr + "t_c_loaded_k,b_c0_t,b_static_t,r_th_k_per_w,kinetic_fraction,transition_low_k,transition_high_k,"
                          "mid_shift_hz,quench_power_dbm,meets_targets,chosen\n";
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& x = all[i];
        c += fmt_double(x.t_c_loaded) + "," + fmt_double(x.b_c0) + "," + fmt_double(x.b_static) + "," + fmt_double(x.r_th) + "," +
             fmt_double(x.kinetic_fraction) + "," + fmt_double(x.transition_low) + "," + fmt_double(x.transition_high) + "," +
             fmt_double(x.mid_shift) + "," + (x.quench_power ? fmt_double(*x.quench_power) : std::string()) + "," +
             (x.meets_targets ? "true" : "false") + "," + (i == 0 ? "true" : "false") + "\n";
    }
    write_out(o, "calibration_candidates.csv", c);
    std::printf("t_c' = %.3f K, b_c0 = %.3g T, r_th = %.4g K/W, alpha = %.4g\n", best.t_c_loaded, best.b_c0, best.r_th,
                best.kinetic_fraction);
    return 0;
}

Simulation load_simulation(const Common& o, const std::string& calib_dir, const RunConfig& cfg) {
    const fs::path dir = calib_dir.empty() ? fs::path(o.out) : fs::path(calib_dir);
    if (!fs::exists(dir / "calibration.csv") || !fs::exists(dir / "magnet_curve.csv"))
        throw ConfigError("calibration artifacts missing in " + dir.string() + ": run cmd_calibrate first");
    return read_calibration(read_text(dir / "calibration.csv"), read_text(dir / "magnet_curve.csv"), cfg);
}

struct SweepArgs {
    std::string kind;
    std::string powers = "-15,-5,0,5";
    std::string temps = "0.135:1.0:0.005";
    double t_bath = 0.785;
    double high = 5.0;
    std::string lows = "-5,-4,-2";
    std::string calib_dir;
    bool traces = false;
};

std::vector<double> parse_range(const std::string& s) {
    const auto parts = detail::split(s, ':');
    double a, b, step;
    if (parts.size() != 3 || !detail::parse_double(parts[0], a) || !detail::parse_double(parts[1], b) ||
        !detail::parse_double(parts[2], step) || !(step > 0) || !(b >= a))
        throw ConfigError("--temps: expected start:stop:step with stop >= start and step > 0");
    std::vector<double> v;
    const int n = static_cast<int>(std::floor((b - a) / step + 1e-9));
    for (int i = 0; i <= n; ++i) v.push_back(a + i * step);
    return v;
}

int cmd_sweep(const Common& o, const SweepArgs& a) {
    const auto cfg = load_config(o);
    const Simulation sim = load_simulation(o, a.calib_dir, cfg);
    std::vector<std::pair<std::string, SweepProtocol>> runs;
    const double z = cfg.protocol.magnet_z;
    if (a.kind.empty() || a.kind == "config") {
        SweepProtocol p = cfg.protocol;
        runs.emplace_back("sweep_protocol", p);
    } else if (a.kind == "temperature") {
        for (double p : parse_list(a.powers, "--powers"))
            runs.emplace_back("sweep_temperature_p" + tag(p), temperature_sweep(p, parse_range(a.temps), cfg.protocol.dwell, z));
    } else if (a.kind == "ramp" || a.kind == "updown") {
        auto powers = db_steps(-15, 5);
        if (a.kind == "updown")
            for (int p = 4; p >= -15; --p) powers.push_back(p);
        runs.emplace_back("sweep_" + a.kind + "_t" + tag(a.t_bath), power_ramp(a.t_bath, powers, cfg.protocol.dwell, z));
    } else if (a.kind == "switch") {
        runs.emplace_back("sweep_switch_t" + tag(a.t_bath), power_switch(a.high, parse_list(a.lows, "--lows"), a.t_bath, 300.0, z));
    } else {
        throw ConfigError("--kind must be config, temperature, ramp, updown or switch");
    }
    const std::vector<std::pair<std::string, std::string>> extra = {
        {"calibrated.b_c0", fmt_double(sim.calib.material.b_c0)},
        {"calibrated.b_static", fmt_double(sim.calib.b_static)},
        {"calibrated.r_th", fmt_double(sim.thermal.r_th)},
        {"calibrated.kinetic_fraction", fmt_double(sim.calib.kinetic_fraction)},
        {"calibrated.f0_ref_hz", fmt_double(sim.calib.f0_ref)},
    };
    std::uint64_t run_index = 0;
    for (const auto& [name, proto] : runs) {
        const auto recs = run_protocol(proto, sim);
        write_out(o, name + ".csv", provenance_header("sweep", cfg, extra) + sweep_csv(recs));
        if (a.traces) {
            for (std::size_t i = 0; i < recs.size(); ++i) {
                const auto& r = recs[i];
                const ResonanceResult res{r.f0, r.q_int, sim.calib.q_ext, r.q_loaded};
                const auto tr = synth_s21(res, sweep_around(res), cfg.noise.sigma, cfg.noise.seed + run_index * 100000 + i,
                                          {r.p_in, r.t_eff, r.time});
                char idx[16];
                std::snprintf(idx, sizeof idx, "%04zu", i);
                write_out(o, "traces/" + name + "_" + idx + ".csv", trace_csv(tr));
            }
        }
        std::printf("%s: %zu records\n", name.c_str(), recs.size());
        ++run_index;
    }
    return 0;
}

int cmd_fit(const Common& o, const std::string& traces, bool magnitude_only, bool background) {
    const auto cfg = load_config(o);
    std::vector<fs::path> files;
    const fs::path src = traces.empty() ? fs::path(o.out) / "traces" : fs::path(traces);
    if (fs::is_directory(src)) {
        for (const auto& e : fs::directory_iterator(src))
            if (e.path().extension() == ".csv") files.push_back(e.path());
    } else if (fs::exists(src)) {
        files.push_back(src);
    } else {
        throw IoError("no traces at " + src.string());
    }
    if (files.empty()) throw IoError("no .csv traces in " + src.string());
    std::sort(files.begin(), files.end());
    FitOptions opt;
    opt.magnitude_only = magnitude_only;
    opt.background = background;
    std::vector<std::pair<std::string, FitReport>> reps;
    int bad = 0;
    for (const auto& f : files) {
        reps.emplace_back(f.filename().string(), fit_resonance(read_trace(read_text(f)), opt));
        bad += reps.back().second.converged ? 0 : 1;
    }
    write_out(o, "fit_report.csv", provenance_header("fit", cfg) + fit_report_csv(reps));
    std::printf("%zu traces fitted, %d not converged\n", reps.size(), bad);
    return 0;
}

int cmd_invert_height(const Common& o, const std::string& map_path, const std::string& f_meas, bool from_map) {
    const auto cfg = load_config(o);
    const fs::path p = map_path.empty() ? fs::path(o.out) / "shift_map.csv" : fs::path(map_path);
    if (!fs::exists(p)) throw IoError("shift map missing at " + p.string() + ": run cmd_shift_map first");
    const auto map = read_shift_map(read_text(p));
    const auto curve = axis_curve(map, 0);
    std::string s = provenance_header("invert-height", cfg) + "f_meas_hz,z_hat_m,in_region,z_sampled_m\n";
    auto one = [&](double f, const std::string& sampled) {
        const auto est = invert_height(f, curve, map.f0_ref);
        s += fmt_double(f) + "," + fmt_double(est.z) + "," + (est.in_region ? "true" : "false") + "," + sampled + "\n";
    };
    if (from_map)
        for (std::size_t i = 0; i < curve.z.size(); ++i) one(map.f0_ref + curve.df[i], fmt_double(curve.z[i]));
    if (!f_meas.empty())
        for (double f : parse_list(f_meas, "--f-meas")) one(f, "");
    if (!from_map && f_meas.empty()) throw ConfigError("invert-height: give --f-meas or --from-map");
    write_out(o, "inversion.csv", s);
    return 0;
}

int fail(int code, const char* kind, const std::string& msg) {
    std::fprintf(stderr, "error: %s: %s\n", kind, msg.c_str());
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"levicav: levitated-magnet microwave cavity simulator"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", common.config_path, "INI-style run configuration");
        c->add_option("--out", common.out, "output directory");
        c->add_option("--seed", common.seed, "override noise.seed");
        c->add_flag("--force", common.force, "overwrite existing outputs");
    };
    auto* mode = app.add_subcommand("mode-solve", "solve the bare cavity mode");
    add_common(mode);
    auto* smap = app.add_subcommand("shift-map", "magnet-position frequency shift map");
    add_common(smap);
    int nx = 20, nz = 20;
    smap->add_option("--nx", nx, "radial samples");
    smap->add_option("--nz", nz, "height samples");
    auto* cal = app.add_subcommand("calibrate", "fit thermal and material parameters to the sweep targets");
    add_common(cal);
    auto* sweep = app.add_subcommand("sweep", "run measurement protocols");
    add_common(sweep);
    SweepArgs sa;
    sweep->add_option("--kind", sa.kind, "config|temperature|ramp|updown|switch");
    sweep->add_option("--powers", sa.powers, "comma-separated dBm list (temperature sweeps)");
    sweep->add_option("--temps", sa.temps, "start:stop:step in K (temperature sweeps)");
    sweep->add_option("--t-bath", sa.t_bath, "bath temperature for ramps and switching, K");
    sweep->add_option("--high", sa.high, "high power for switching, dBm");
    sweep->add_option("--lows", sa.lows, "low powers for switching, dBm");
    sweep->add_option("--calibration", sa.calib_dir, "directory holding calibrate outputs (default --out)");
    sweep->add_flag("--traces", sa.traces, "also write a synthetic S21 trace per record");
    auto* fit = app.add_subcommand("fit", "fit S21 traces");
    add_common(fit);
    std::string traces;
    bool mag_only = false, background = false;
    fit->add_option("--traces", traces, "trace file or directory (default OUT/traces)");
    fit->add_flag("--magnitude-only", mag_only, "fit |S21| only");
    fit->add_flag("--background", background, "add a complex linear background");
    auto* inv = app.add_subcommand("invert-height", "magnet height from measured frequency");
    add_common(inv);
    std::string map_path, f_meas;
    bool from_map = false;
    inv->add_option("--shift-map", map_path, "shift map CSV (default OUT/shift_map.csv)");
    inv->add_option("--f-meas", f_meas, "comma-separated measured frequencies, Hz");
    inv->add_flag("--from-map", from_map, "invert every on-axis sample of the map");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, "usage", e.what());
    }

    try {
        if (*mode) return cmd_mode_solve(common);
        if (*smap) return cmd_shift_map(common, nx, nz);
        if (*cal) return cmd_calibrate(common);
        if (*sweep) return cmd_sweep(common, sa);
        if (*fit) return cmd_fit(common, traces, mag_only, background);
        if (*inv) return cmd_invert_height(common, map_path, f_meas, from_map);
    } catch (const ValidationError& e) {
        return fail(2, "config", e.what());
    } catch (const IoError& e) {
        return fail(4, "io", e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(4, "io", e.what());
    } catch (const std::exception& e) {
        return fail(3, "numerical", e.what());
    }
    return 0;
}
