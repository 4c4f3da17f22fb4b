#pragma once

// Stateful replay of the cryostat protocols: bath sweeps, power ramps and power switching,
// with RF heating of the wall and flux trapped by quench events.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levicav/resonance.hpp"
#include "levicav/superconductor.hpp"
#include "levicav/units.hpp"

namespace levicav {

struct ThermalParams {
    double r_th = 500.0;   // K/W
    double tau_th = 5.0;   // s
    double base_t = 0.135; // K
    double eta_trap = 3e4;            // ohm / T^2
    double flux_pin_threshold = 1e-3; // T
    int substeps = 20;
};

inline void validate_thermal(const ThermalParams& th) {
    std::vector<std::string> errs;
    if (!(th.r_th >= 0)) errs.emplace_back("r_th must be >= 0");
    if (!(th.tau_th > 0)) errs.emplace_back("tau_th must be > 0");
    if (!(th.base_t >= 0)) errs.emplace_back("base_t must be >= 0");
    if (!(th.eta_trap >= 0)) errs.emplace_back("eta_trap must be >= 0");
    if (!(th.flux_pin_threshold > 0)) errs.emplace_back("flux_pin_threshold must be > 0");
    if (th.substeps < 1) errs.emplace_back("substeps must be >= 1");
    detail::join_errors(errs, "invalid thermal parameters");
}

/// Calibrated system plus the cryostat's thermal parameters.
struct Simulation {
    SystemCalibration calib;
    ThermalParams thermal;
};

struct CryostatState {
    double t_bath = 0.135;
    double t_eff = 0.135;
    double r_th = 0.0;
    double trapped_flux_r = 0.0;
    bool quenched = false;
    double time = 0.0;
};

enum class SweepKind { TemperatureSweep, PowerRamp, PowerSwitch };
enum class RecordState { SC, Normal, Bistable };

inline const char* to_string(RecordState s) {
    switch (s) {
        case RecordState::SC: return "SC";
        case RecordState::Normal: return "Normal";
        case RecordState::Bistable: return "Bistable";
    }
    return "?";
}

inline const char* to_string(SweepKind k) {
    switch (k) {
        case SweepKind::TemperatureSweep: return "temperature";
        case SweepKind::PowerRamp: return "ramp";
        case SweepKind::PowerSwitch: return "switch";
    }
    return "?";
}

struct Setpoint {
    double t_bath = 0.0;  // K
    double p_in = 0.0;    // dBm
};

struct SweepProtocol {
    SweepKind kind = SweepKind::PowerRamp;
    std::vector<Setpoint> setpoints;
    double dwell = 60.0;  // s
    double magnet_z = 1.0e-3;
};

struct SweepRecord {
    double time = 0.0;
    double t_bath = 0.0;
    double t_eff = 0.0;
    double p_in = 0.0;
    double f0 = 0.0;
    double q_loaded = 0.0;
    double q_int = 0.0;
    RecordState state = RecordState::SC;
    double trapped_flux_r = 0.0;
    double b_rf = 0.0;
};

inline CryostatState warm_reset(const CryostatState& s, const ThermalParams& th) {
    CryostatState out = s;
    out.t_bath = out.t_eff = th.base_t;
    out.trapped_flux_r = 0.0;
    out.quenched = false;
    out.r_th = th.r_th;
    return out;
}

/// Exponential relaxation of the wall toward t_bath + r_th p_diss, where p_diss is the
/// fraction 2x(1-x) of the drive absorbed by the walls (x = 2 q_loaded / q_ext).
inline CryostatState thermal_step(const CryostatState& s, double p_in_w, const ResonanceResult& q, double dt,
                                  double tau_th) {
    if (!(dt > 0)) throw DomainError("thermal_step: dt must be > 0");
    if (!(tau_th > 0)) throw DomainError("thermal_step: tau_th must be > 0");
    const double x = q.transmission();
    const double p_diss = p_in_w * std::max(dissipated_fraction(x), 0.0);
    const double target = s.t_bath + s.r_th * p_diss;
    CryostatState out = s;
    out.t_eff = target + (s.t_eff - target) * std::exp(-dt / tau_th);
    out.t_eff = std::max(out.t_eff, out.t_bath);
    out.time += dt;
    return out;
}

/// Quench bookkeeping at the end of a dwell. `collapsed` marks a fixed point that did not settle.
inline CryostatState quench_update(const CryostatState& s, double b_rf_peak, const MaterialParams& wall,
                                   const ThermalParams& th, bool collapsed = false) {
    CryostatState out = s;
    const bool over = s.t_eff >= wall.t_c || b_rf_peak >= critical_field(s.t_eff, wall) || collapsed;
    out.quenched = over;
    if (over || b_rf_peak > th.flux_pin_threshold) out.trapped_flux_r += th.eta_trap * b_rf_peak * b_rf_peak;
    return out;
}

namespace detail {

struct DwellOutcome {
    OperatingPoint op;
    bool bistable = false;
};

inline DwellOutcome observe(const CryostatState& s, double p_in, double magnet_z, const Simulation& sim) {
    try {
        return {observable_state(s.t_eff, p_in, magnet_z, sim.calib, s.trapped_flux_r), false};
    } catch (const BistableError&) {
        return {normal_branch(p_in, magnet_z, sim.calib, s.trapped_flux_r), true};
    }
}

}  // namespace detail

/// Hold one setpoint for `dwell` seconds and return the record taken at the end.
inline SweepRecord dwell_at(CryostatState& s, const Setpoint& sp, double dwell, double magnet_z, const Simulation& sim) {
    if (!(dwell > 0)) throw DomainError("dwell must be > 0");
    s.t_bath = sp.t_bath;
    s.t_eff = std::max(s.t_eff, s.t_bath);
    const double p_w = detail::input_watts(sp.p_in);
    const double dt = dwell / sim.thermal.substeps;
    for (int k = 0; k < sim.thermal.substeps; ++k) {
        const auto o = detail::observe(s, sp.p_in, magnet_z, sim);
        s = thermal_step(s, p_w, o.op.res, dt, sim.thermal.tau_th);
    }
    const auto o = detail::observe(s, sp.p_in, magnet_z, sim);
    const MaterialParams wall = sim.calib.wall();
    s = quench_update(s, o.op.b_rf, wall, sim.thermal, o.bistable || !o.op.is_superconducting);

    SweepRecord r;
    r.time = s.time;
    r.t_bath = s.t_bath;
    r.t_eff = s.t_eff;
    r.p_in = sp.p_in;
    r.f0 = o.op.res.f0;
    r.q_loaded = o.op.res.q_loaded;
    r.q_int = o.op.res.q_int;
    r.state = o.bistable ? RecordState::Bistable : (o.op.is_superconducting ? RecordState::SC : RecordState::Normal);
    r.trapped_flux_r = s.trapped_flux_r;
    r.b_rf = o.op.b_rf;
    return r;
}

/// Runs the setpoints in order from a freshly reset cryostat (or from `start` when given).
inline std::vector<SweepRecord> run_protocol(const SweepProtocol& p, const Simulation& sim,
                                             std::optional<CryostatState> start = std::nullopt) {
    if (p.setpoints.empty()) throw ValidationError("protocol.setpoints must be non-empty");
    if (!(p.dwell > 0)) throw ValidationError("protocol.dwell must be > 0");
    if (!(sim.calib.lambda_ref > 0)) throw ValidationError("calibration missing: run cmd_calibrate first");
    validate_thermal(sim.thermal);
    CryostatState s = start.value_or(warm_reset(CryostatState{}, sim.thermal));
    s.r_th = sim.thermal.r_th;
    if (!start) s.t_eff = s.t_bath = p.setpoints.front().t_bath;
    std::vector<SweepRecord> out;
    out.reserve(p.setpoints.size());
    for (const auto& sp : p.setpoints) out.push_back(dwell_at(s, sp, p.dwell, p.magnet_z, sim));
    return out;
}

/// Fresh-cooldown dwell at one bath temperature; true when the wall ends in the normal state.
inline bool ends_normal(double t_bath, double p_in, double magnet_z, const Simulation& sim, double dwell = 60.0) {
    CryostatState s = warm_reset(CryostatState{}, sim.thermal);
    s.t_bath = s.t_eff = t_bath;
    return dwell_at(s, {t_bath, p_in}, dwell, magnet_z, sim).state != RecordState::SC;
}

/// Lowest bath temperature whose dwell-settled state is not superconducting, to `resolution`.
inline double transition_temperature(double p_in, const Simulation& sim, double magnet_z, double resolution = 1e-3) {
    double lo = sim.thermal.base_t;
    double hi = 1.2 * sim.calib.material.t_c;
    if (ends_normal(lo, p_in, magnet_z, sim)) return lo;
    if (!ends_normal(hi, p_in, magnet_z, sim)) throw DomainError("no transition found");
    while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        (ends_normal(mid, p_in, magnet_z, sim) ? hi : lo) = mid;
    }
    return hi;
}

inline SweepProtocol power_ramp(double t_bath, const std::vector<double>& powers, double dwell = 60.0, double magnet_z = 1.0e-3) {
    SweepProtocol p{SweepKind::PowerRamp, {}, dwell, magnet_z};
    for (double pw : powers) p.setpoints.push_back({t_bath, pw});
    return p;
}

inline SweepProtocol temperature_sweep(double p_in, const std::vector<double>& temps, double dwell = 60.0, double magnet_z = 1.0e-3) {
    SweepProtocol p{SweepKind::TemperatureSweep, {}, dwell, magnet_z};
    for (double t : temps) p.setpoints.push_back({t, p_in});
    return p;
}

/// high, lows[0], high, lows[1], ... at fixed bath temperature.
inline SweepProtocol power_switch(double high, const std::vector<double>& lows, double t_bath, double dwell = 300.0,
                                  double magnet_z = 1.0e-3) {
    SweepProtocol p{SweepKind::PowerSwitch, {}, dwell, magnet_z};
    for (double lo : lows) {
        p.setpoints.push_back({t_bath, high});
        p.setpoints.push_back({t_bath, lo});
    }
    return p;
}

inline std::vector<SweepRecord> power_switch_series(double high, const std::vector<double>& lows, double t_bath,
                                                    const Simulation& sim, double magnet_z = 1.0e-3, double dwell = 300.0) {
    return run_protocol(power_switch(high, lows, t_bath, dwell, magnet_z), sim);
}

/// Integer-dB steps from a to b inclusive (either direction).
inline std::vector<double> db_steps(int a, int b) {
    std::vector<double> v;
    const int step = a <= b ? 1 : -1;
    for (int p = a; p != b + step; p += step) v.push_back(p);
    return v;
}

/// Largest |f0 - f0(first record)| over a run.
inline double max_shift(const std::vector<SweepRecord>& recs) {
    double m = 0.0;
    for (const auto& r : recs) m = std::max(m, std::abs(r.f0 - recs.front().f0));
    return m;
}

}  // namespace levicav
