#pragma once

// Shared fixtures: the default-geometry mode and a calibrated simulation, each built once per process.

#include "levicav/calibration.hpp"
#include "levicav/config.hpp"

namespace levicav::fixtures {

inline const ModeField& default_mode() {
    static const ModeField m = [] {
        const RunConfig cfg;
        return solve_bare_mode(cfg.cavity, make_grid(cfg.cavity, cfg.solver.dr, cfg.solver.dz));
    }();
    return m;
}

inline const Simulation& uncalibrated() {
    static const Simulation s = uncalibrated_simulation(RunConfig{}, default_mode());
    return s;
}

struct Calibrated {
    Simulation sim;
    CalibrationOutcome outcome;
};

inline const Calibrated& calibrated() {
    static const Calibrated c = [] {
        const auto all = calibrate(uncalibrated());
        return Calibrated{apply_calibration(uncalibrated(), all.front()), all.front()};
    }();
    return c;
}

}  // namespace levicav::fixtures
