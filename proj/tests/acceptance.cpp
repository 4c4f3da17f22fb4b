// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "common.hpp"
#include "levicav/io.hpp"

using namespace levicav;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1

Verdict pillbox_oracle() {
    CavityGeometry g;
    g.outer_radius = 7e-3;
    g.outer_height = 10e-3;
    g.stub_height = g.stub_radius = 0.0;
    const double exact = kBesselJ0Zero * constants().c / (2 * std::numbers::pi * g.outer_radius);
    const auto t0 = std::chrono::steady_clock::now();
    double err[3];
    const double h[3] = {100e-6, 50e-6, 25e-6};
    for (int i = 0; i < 3; ++i) err[i] = std::abs(solve_bare_mode(g, make_grid(g, h[i], h[i])).f0 - exact) / exact;
    const double secs = seconds_since(t0);
    const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
    const bool ok = err[0] < 0.01 && std::abs(p1 - 2) < 0.3 && std::abs(p2 - 2) < 0.3 && secs < 60;
    return {ok, fmt("rel err %.2e at 100 um, observed orders %.2f / %.2f, %.0f s", err[0], p1, p2, secs)};
}

// ---- 2

Verdict two_fluid() {
    MaterialParams m;
    const double x = superfluid_fraction(0.5 * m.t_c, m.t_c);
    const double l = penetration_depth(0.99 * m.t_c, m) / m.lambda0;
    const double l_exact = 1.0 / std::sqrt(1.0 - 0.99 * 0.99 * 0.99 * 0.99);
    bool monotone = true;
    double prev = 0;
    for (int i = 0; i < 10000; ++i) {
        const double v = penetration_depth(m.t_c * i / 10000.0, m);
        monotone &= v >= prev;
        prev = v;
    }
    const double near = penetration_depth(m.t_c * (1 - 1e-12), m) / m.lambda0;
    const bool ok = std::abs(x - 0.9375) <= 1e-12 * 0.9375 && std::abs(l - l_exact) <= 1e-12 * l_exact &&
                    std::abs(l - 5.038) < 5e-4 && monotone && near > 1e5;
    return {ok, fmt("x_s(0.5 Tc) = %.15g, lambda(0.99 Tc)/lambda0 = %.6f, lambda(Tc - 1e-12 Tc)/lambda0 = %.3g", x, l, near)};
}

// ---- 3

Verdict sign_structure() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& m = fixtures::default_mode();
    const double a = 0.5e-3;
    const auto map = shift_map(m, linspace(0.0, m.geometry.stub_radius, 20), linspace(a, a + 2e-3, 20), a);
    const double secs = seconds_since(t0);

    // (a) contact row: strictly decreasing in x.
    bool radial = true;
    std::size_t first_rise = 0;
    for (std::size_t ix = 1; ix < map.x_coords.size(); ++ix)
        if (!(*map.at(ix, 0) < *map.at(ix - 1, 0))) {
            radial = false;
            if (!first_rise) first_rise = ix;
        }
    // (b) every column of contact positions: strictly increasing in z, x = 0 in particular.
    bool vertical = true;
    for (std::size_t ix = 0; ix < map.x_coords.size(); ++ix)
        for (std::size_t iz = 1; iz < map.z_coords.size(); ++iz) vertical &= *map.at(ix, iz) > *map.at(ix, iz - 1);
    // (c) |df| over the contact row peaks at the stub edge.
    std::size_t arg = 0;
    for (std::size_t ix = 1; ix < map.x_coords.size(); ++ix)
        if (std::abs(*map.at(ix, 0)) > std::abs(*map.at(arg, 0))) arg = ix;
    const bool edge = arg + 1 == map.x_coords.size();
    std::string d = std::string("(a) ") + (radial ? "yes" : "no") + ", (b) " + (vertical ? "yes" : "no") + ", (c) " +
                    (edge ? "yes" : "no") + fmt("; contact-row |df| peaks at x = %.2f mm (%.2f MHz, edge %.2f MHz)",
                                                map.x_coords[arg] * 1e3, std::abs(*map.at(arg, 0)) * 1e-6,
                                                std::abs(*map.at(map.x_coords.size() - 1, 0)) * 1e-6);
    if (!radial) d += fmt(", first non-decrease at x = %.2f mm", map.x_coords[first_rise] * 1e3);
    d += fmt(", %.0f s", secs);
    return {radial && vertical && edge && secs < 300, d};
}

// ---- 4

Verdict perturbation_vs_direct() {
    const CavityGeometry g;
    const auto grid = make_grid(g, 50e-6, 50e-6);
    const double a = 0.5e-3;
    ModeSolveOptions opt;
    opt.modes = 1;
    const auto bare = solve_modes(g, grid, {}, opt).front();
    opt.target_hz = bare.f0;
    std::string d;
    bool ok = true;
    for (double z : {0.8e-3, 1.2e-3, 1.8e-3}) {
        const double direct = solve_modes(g, grid, {AxisSphere{g.stub_height + z, a}}, opt).front().f0 - bare.f0;
        const double pert = slater_shift(bare, {0.0, z}, a);
        const double rel = std::abs(pert - direct) / std::abs(direct);
        ok &= rel <= 0.25;
        d += fmt("z=%.1f mm: %.2f vs %.2f MHz (%.0f%%); ", z * 1e3, pert * 1e-6, direct * 1e-6, 100 * rel);
    }
    d.resize(d.size() - 2);
    return {ok, d};
}

// ---- 5

Verdict fit_round_trip() {
    const auto& sim = fixtures::calibrated().sim;
    const auto op = observable_state(0.5, -15.0, 1e-3, sim.calib);
    const auto res = op.res;
    const auto freqs = sweep_around(res);
    const auto clean = fit_resonance(synth_s21(res, freqs, 0.0, 1));
    const double clean_err = std::abs(clean.f0_hat - res.f0) / res.f0;
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto rep = fit_resonance(synth_s21(res, freqs, 1e-3, seed));
        const bool f_ok = std::abs(rep.f0_hat - res.f0) <= 0.1 * res.linewidth();
        const bool q_ok = std::abs(rep.q_loaded_hat - res.q_loaded) <= 0.05 * res.q_loaded;
        good += rep.converged && f_ok && q_ok;
    }
    return {clean_err <= 1e-9 && good >= 95,
            fmt("noiseless f0 rel err %.1e; %.0f/100 noisy fits within 0.1 linewidth and 5%% Q (Q_l = %.0f)", clean_err, static_cast<double>(good),
                res.q_loaded)};
}

// ---- 6

Verdict transition_curve() {
    const auto& sim = fixtures::calibrated().sim;
    std::vector<double> tt;
    for (double p : db_steps(-15, 5)) tt.push_back(transition_temperature(p, sim, 1e-3));
    bool non_increasing = true;
    for (std::size_t i = 1; i < tt.size(); ++i) non_increasing &= tt[i] <= tt[i - 1];
    const bool ok = tt.front() >= 0.75 && tt.front() <= 0.85 && non_increasing && tt.back() <= tt.front() - 0.030;
    return {ok, fmt("T(-15 dBm) = %.3f K, T(5 dBm) = %.3f K, drop %.0f mK", tt.front(), tt.back(), 1e3 * (tt.front() - tt.back())) +
                    (non_increasing ? ", non-increasing" : ", NOT monotone")};
}

// ---- 7

double shift_through_collapse(const std::vector<SweepRecord>& recs) {
    double m = 0;
    for (const auto& r : recs) {
        m = std::max(m, std::abs(r.f0 - recs.front().f0));
        if (r.state != RecordState::SC) break;
    }
    return m;
}

double shift_before_collapse(const std::vector<SweepRecord>& recs) {
    double m = 0;
    for (const auto& r : recs) {
        if (r.state != RecordState::SC) break;
        m = std::max(m, std::abs(r.f0 - recs.front().f0));
    }
    return m;
}

Verdict ramp_shifts() {
    const auto& sim = fixtures::calibrated().sim;
    const auto up = db_steps(-15, 5);
    double worst_cold = 0;
    for (double t : {0.135, 0.3, 0.45, 0.55}) {
        const auto recs = run_protocol(power_ramp(t, up), sim);
        worst_cold = std::max(worst_cold, max_shift(recs) / recs.front().f0);
    }
    const auto r757 = run_protocol(power_ramp(0.757, up), sim);
    const auto r785 = run_protocol(power_ramp(0.785, up), sim);
    const double s757 = shift_through_collapse(r757), s785 = shift_through_collapse(r785);
    const bool ok = worst_cold < 1e-6 && s757 >= 10e6 && s785 >= 10e6;
    return {ok, fmt("max relative change at <= 550 mK %.2e; |df0| 757 mK %.2f MHz, 785 mK %.2f MHz (%.2f MHz before collapse)", worst_cold,
                    s757 * 1e-6, s785 * 1e-6, shift_before_collapse(r785) * 1e-6)};
}

// ---- 8

std::vector<double> up_down() {
    auto p = db_steps(-15, 5);
    for (double x : db_steps(4, -15)) p.push_back(x);
    return p;
}

Verdict hysteresis() {
    const auto& sim = fixtures::calibrated().sim;
    const auto recs = run_protocol(power_ramp(0.785, up_down()), sim);
    const std::size_t n_up = 21;
    std::optional<double> quench;
    for (std::size_t i = 0; i < n_up && !quench; ++i)
        if (recs[i].state != RecordState::SC) quench = recs[i].p_in;
    bool no_recovery = true;
    int matched = 0;
    for (std::size_t i = n_up; i < recs.size(); ++i) {
        if (!quench || recs[i].p_in >= *quench) continue;
        const auto& u = recs[static_cast<std::size_t>(recs[i].p_in + 15)];
        no_recovery &= recs[i].q_loaded < u.q_loaded;
        ++matched;
    }
    const auto cold = run_protocol(power_ramp(0.757, up_down()), sim);
    bool clean = true;
    for (const auto& r : cold) clean &= r.trapped_flux_r == 0.0;
    const bool ok = quench && *quench >= -5 && *quench <= 0 && no_recovery && matched > 0 && clean;
    return {ok, (quench ? fmt("785 mK collapse at %.0f dBm", *quench) : std::string("no collapse at 785 mK")) +
                    fmt("; down-leg Q below up-leg at %.0f/%.0f matched powers below it", no_recovery ? matched : 0.0, matched) +
                    (clean ? "; 757 mK up-down trapped flux 0" : "; 757 mK trapped flux nonzero")};
}

// ---- 9

Verdict switching() {
    const auto& sim = fixtures::calibrated().sim;
    const auto s757 = power_switch_series(5.0, {-5, -4, -2}, 0.757, sim);
    double lo = INFINITY, hi = -INFINITY, lw = INFINITY;
    bool sc = true;
    for (std::size_t i = 1; i < s757.size(); i += 2) {
        lo = std::min(lo, s757[i].f0);
        hi = std::max(hi, s757[i].f0);
        lw = std::min(lw, s757[i].f0 / s757[i].q_loaded);
        sc &= s757[i].state == RecordState::SC;
    }
    const auto s785 = power_switch_series(5.0, {-5, -4, -2}, 0.785, sim);
    bool rising = true;
    for (std::size_t i = 1; i < s785.size(); ++i) rising &= s785[i].trapped_flux_r > s785[i - 1].trapped_flux_r;
    rising &= s785.front().trapped_flux_r > 0;
    const bool ok = hi - lo < lw && sc && rising;
    return {ok, fmt("757 mK low-power f0 spread %.3f MHz vs fit resolution (loaded linewidth) %.3f MHz", (hi - lo) * 1e-6, lw * 1e-6) +
                    (rising ? "; 785 mK trapped flux strictly increasing" : "; 785 mK trapped flux NOT strictly increasing")};
}

// ---- 10

Verdict inversion() {
    const auto& c = fixtures::calibrated().sim.calib;
    const auto& curve = c.magnet_curve;
    double worst = 0;
    for (std::size_t i = 0; i < curve.z.size(); ++i)
        worst = std::max(worst, std::abs(invert_height(c.f0_ref + curve.df[i], curve, c.f0_ref).z - curve.z[i]));
    return {worst <= 10e-6, fmt("%.0f sampled heights, worst error %.3g um", static_cast<double>(curve.z.size()), worst * 1e6)};
}

// ---- 11

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LEVICAV_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
    return files;
}

Verdict determinism() {
    std::random_device rd;
    const fs::path root = fs::temp_directory_path() / ("levicav_accept_" + std::to_string(rd()));
    const char* steps[] = {"mode-solve", "shift-map", "calibrate", "sweep --kind updown --t-bath 0.785 --traces",
                           "sweep --kind switch --t-bath 0.757 --traces", "sweep --kind temperature --powers -15,5 --temps 0.7:0.85:0.01",
                           "fit", "invert-height --from-map"};
    for (const char* run : {"a", "b"})
        for (const char* s : steps)
            if (int rc = run_cli(std::string(s) + " --out " + (root / run).string()); rc != 0) {
                fs::remove_all(root);
                return {false, std::string("step '") + s + "' exited " + std::to_string(rc)};
            }
    const auto a = snapshot(root / "a"), b = snapshot(root / "b");
    std::size_t same = 0;
    for (const auto& [k, v] : a) same += b.count(k) && b.at(k) == v;
    fs::remove_all(root);
    return {a == b && !a.empty(), fmt("%.0f of %.0f CSV files byte-identical across two full runs", static_cast<double>(same), static_cast<double>(a.size()))};
}

}  // namespace

// With a criterion number as the only argument, runs just that one.
int main(int argc, char** argv) {
    using Entry = std::pair<const char*, Verdict (*)()>;
    const Entry all[] = {{"eigensolver oracle", pillbox_oracle},
                         {"two-fluid identities", two_fluid},
                         {"shift-map sign structure", sign_structure},
                         {"perturbation vs direct solve", perturbation_vs_direct},
                         {"fit round trip", fit_round_trip},
                         {"transition temperature vs power", transition_curve},
                         {"power-ramp frequency shifts", ramp_shifts},
                         {"hysteresis", hysteresis},
                         {"power switching", switching},
                         {"height inversion", inversion},
                         {"determinism", determinism}};
    const int n = static_cast<int>(std::size(all));
    const int only = argc > 1 ? std::atoi(argv[1]) : 0;
    if (argc > 2 || only < 0 || only > n || (argc == 2 && only == 0)) {
        std::fprintf(stderr, "usage: acceptance [criterion 1-%d]\n", n);
        return 2;
    }
    int run = 0;
    for (int i = 1; i <= n; ++i)
        if (!only || only == i) {
            report(i, all[i - 1].first, all[i - 1].second);
            ++run;
        }
    std::printf("%d of %d criteria failed\n", failures, run);
    return failures ? 1 : 0;
}
