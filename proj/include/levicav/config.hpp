#pragma once

// Sectioned key = value run configuration with typed validation and a byte-stable emitter.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "levicav/calibration.hpp"
#include "levicav/experiment.hpp"
#include "levicav/mode_solver.hpp"
#include "levicav/perturbation.hpp"
#include "levicav/units.hpp"

namespace levicav {

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct SolverParams {
    double dr = 1e-4;
    double dz = 1e-4;
    BetaMode beta_mode = BetaMode::TM01;
    PerturbationAverage perturbation_average = PerturbationAverage::Center;
};

struct NoiseParams {
    double sigma = 1e-3;
    std::uint64_t seed = 12345;
};

inline SweepProtocol default_protocol() { return power_ramp(0.785, db_steps(-15, 5), 60.0, 1.0e-3); }

struct RunConfig {
    CavityGeometry cavity;
    MagnetSpec magnet;
    double b_static = 5.5e-3;  // magnet.b_static
    MaterialParams material;
    double kinetic_fraction = 1e-3;  // material.kinetic_fraction
    CouplingParams coupling;
    ThermalParams thermal;
    SolverParams solver;
    SweepProtocol protocol = default_protocol();
    NoiseParams noise;
};

/// Shortest decimal text that reads back to the same double.
inline std::string fmt_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto r = std::from_chars(b, e, out);
    return r.ec == std::errc{} && r.ptr == e && std::isfinite(out);
}

struct Field {
    std::string section, key;
    std::function<std::string(const RunConfig&)> emit;
    std::function<void(RunConfig&, const std::string&)> parse;  // throws ConfigError with the message tail
};

[[noreturn]] inline void bad(const std::string& what) { throw ConfigError(what); }

inline Field number(std::string sec, std::string key, std::function<double&(RunConfig&)> ref) {
    const std::string name = sec + "." + key;
    return {sec, key, [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
            [ref, name](RunConfig& c, const std::string& v) {
                double d;
                if (!parse_double(v, d)) bad(name + ": expected a number, got '" + v + "'");
                ref(c) = d;
            }};
}

inline std::string emit_setpoints(const std::vector<Setpoint>& sp) {
    std::string s;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        if (i) s += ", ";
        s += fmt_double(sp[i].t_bath) + ":" + fmt_double(sp[i].p_in);
    }
    return s;
}

inline std::vector<Setpoint> parse_setpoints(const std::string& v) {
    std::vector<Setpoint> out;
    if (trim(v).empty()) return out;
    for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        Setpoint sp;
        if (parts.size() != 2 || !parse_double(parts[0], sp.t_bath) || !parse_double(parts[1], sp.p_in))
            bad("protocol.setpoints: expected t_bath:p_in pairs, got '" + item + "'");
        out.push_back(sp);
    }
    return out;
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        v.push_back(number("cavity", "outer_radius", [](RunConfig& c) -> double& { return c.cavity.outer_radius; }));
        v.push_back(number("cavity", "outer_height", [](RunConfig& c) -> double& { return c.cavity.outer_height; }));
        v.push_back(number("cavity", "stub_height", [](RunConfig& c) -> double& { return c.cavity.stub_height; }));
        v.push_back(number("cavity", "stub_radius", [](RunConfig& c) -> double& { return c.cavity.stub_radius; }));
        v.push_back(number("magnet", "radius", [](RunConfig& c) -> double& { return c.magnet.radius; }));
        v.push_back(number("magnet", "remanence", [](RunConfig& c) -> double& { return c.magnet.remanence; }));
        v.push_back(number("magnet", "b_static", [](RunConfig& c) -> double& { return c.b_static; }));
        v.push_back(number("material", "t_c", [](RunConfig& c) -> double& { return c.material.t_c; }));
        v.push_back(number("material", "lambda0", [](RunConfig& c) -> double& { return c.material.lambda0; }));
        v.push_back(number("material", "sigma_n", [](RunConfig& c) -> double& { return c.material.sigma_n; }));
        v.push_back(number("material", "b_c0", [](RunConfig& c) -> double& { return c.material.b_c0; }));
        v.push_back(number("material", "r_res", [](RunConfig& c) -> double& { return c.material.r_res; }));
        v.push_back(number("material", "kinetic_fraction", [](RunConfig& c) -> double& { return c.kinetic_fraction; }));
        v.push_back(number("coupling", "q_ext", [](RunConfig& c) -> double& { return c.coupling.q_ext; }));
        v.push_back(number("thermal", "r_th", [](RunConfig& c) -> double& { return c.thermal.r_th; }));
        v.push_back(number("thermal", "tau_th", [](RunConfig& c) -> double& { return c.thermal.tau_th; }));
        v.push_back(number("thermal", "base_t", [](RunConfig& c) -> double& { return c.thermal.base_t; }));
        v.push_back(number("thermal", "eta_trap", [](RunConfig& c) -> double& { return c.thermal.eta_trap; }));
        v.push_back(number("thermal", "flux_pin_threshold", [](RunConfig& c) -> double& { return c.thermal.flux_pin_threshold; }));
        v.push_back(number("solver", "dr", [](RunConfig& c) -> double& { return c.solver.dr; }));
        v.push_back(number("solver", "dz", [](RunConfig& c) -> double& { return c.solver.dz; }));
        v.push_back({"solver", "beta_mode",
                     [](const RunConfig& c) { return std::string(c.solver.beta_mode == BetaMode::TM01 ? "TM01" : "TE11"); },
                     [](RunConfig& c, const std::string& s) {
                         if (s == "TM01") c.solver.beta_mode = BetaMode::TM01;
                         else if (s == "TE11") c.solver.beta_mode = BetaMode::TE11;
                         else bad("solver.beta_mode: expected TM01 or TE11, got '" + s + "'");
                     }});
        v.push_back({"solver", "perturbation_average",
                     [](const RunConfig& c) {
                         return std::string(c.solver.perturbation_average == PerturbationAverage::Center ? "center" : "volume");
                     },
                     [](RunConfig& c, const std::string& s) {
                         if (s == "center") c.solver.perturbation_average = PerturbationAverage::Center;
                         else if (s == "volume") c.solver.perturbation_average = PerturbationAverage::Volume;
                         else bad("solver.perturbation_average: expected center or volume, got '" + s + "'");
                     }});
        v.push_back({"protocol", "kind", [](const RunConfig& c) { return std::string(to_string(c.protocol.kind)); },
                     [](RunConfig& c, const std::string& s) {
                         if (s == "temperature") c.protocol.kind = SweepKind::TemperatureSweep;
                         else if (s == "ramp") c.protocol.kind = SweepKind::PowerRamp;
                         else if (s == "switch") c.protocol.kind = SweepKind::PowerSwitch;
                         else bad("protocol.kind: expected temperature, ramp or switch, got '" + s + "'");
                     }});
        v.push_back({"protocol", "setpoints", [](const RunConfig& c) { return emit_setpoints(c.protocol.setpoints); },
                     [](RunConfig& c, const std::string& s) { c.protocol.setpoints = parse_setpoints(s); }});
        v.push_back(number("protocol", "dwell", [](RunConfig& c) -> double& { return c.protocol.dwell; }));
        v.push_back(number("protocol", "magnet_z", [](RunConfig& c) -> double& { return c.protocol.magnet_z; }));
        v.push_back(number("noise", "sigma", [](RunConfig& c) -> double& { return c.noise.sigma; }));
        v.push_back({"noise", "seed", [](const RunConfig& c) { return std::to_string(c.noise.seed); },
                     [](RunConfig& c, const std::string& s) {
                         std::uint64_t n = 0;
                         auto r = std::from_chars(s.data(), s.data() + s.size(), n);
                         if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
                             bad("noise.seed: expected a non-negative integer, got '" + s + "'");
                         c.noise.seed = n;
                     }});
        return v;
    }();
    return f;
}

}  // namespace detail

/// Every invariant, reported as "section.key ..." for the first violation found.
inline void validate_config(const RunConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) detail::bad(std::string(name) + " must be > 0");
    };
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0)) detail::bad(std::string(name) + " must be >= 0");
    };
    positive(c.cavity.outer_radius, "cavity.outer_radius");
    positive(c.cavity.outer_height, "cavity.outer_height");
    positive(c.cavity.stub_height, "cavity.stub_height");
    positive(c.cavity.stub_radius, "cavity.stub_radius");
    if (c.cavity.stub_radius >= c.cavity.outer_radius) detail::bad("cavity.stub_radius must be < cavity.outer_radius");
    if (c.cavity.stub_height >= c.cavity.outer_height) detail::bad("cavity.stub_height must be < cavity.outer_height");
    positive(c.magnet.radius, "magnet.radius");
    if (c.magnet.radius >= c.cavity.stub_radius) detail::bad("magnet.radius must be < cavity.stub_radius");
    non_negative(c.magnet.remanence, "magnet.remanence");
    non_negative(c.b_static, "magnet.b_static");
    positive(c.material.t_c, "material.t_c");
    positive(c.material.lambda0, "material.lambda0");
    positive(c.material.sigma_n, "material.sigma_n");
    positive(c.material.b_c0, "material.b_c0");
    positive(c.material.r_res, "material.r_res");
    if (c.b_static >= c.material.b_c0) detail::bad("magnet.b_static must be < material.b_c0");
    if (!(c.kinetic_fraction >= 0 && c.kinetic_fraction < 1)) detail::bad("material.kinetic_fraction must lie in [0, 1)");
    positive(c.coupling.q_ext, "coupling.q_ext");
    non_negative(c.thermal.r_th, "thermal.r_th");
    positive(c.thermal.tau_th, "thermal.tau_th");
    non_negative(c.thermal.base_t, "thermal.base_t");
    non_negative(c.thermal.eta_trap, "thermal.eta_trap");
    positive(c.thermal.flux_pin_threshold, "thermal.flux_pin_threshold");
    positive(c.solver.dr, "solver.dr");
    positive(c.solver.dz, "solver.dz");
    if (c.protocol.setpoints.empty()) detail::bad("protocol.setpoints must be non-empty");
    for (const auto& sp : c.protocol.setpoints)
        if (!(sp.t_bath >= 0)) detail::bad("protocol.setpoints: t_bath must be >= 0");
    positive(c.protocol.dwell, "protocol.dwell");
    positive(c.protocol.magnet_z, "protocol.magnet_z");
    non_negative(c.noise.sigma, "noise.sigma");
}

inline RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    std::map<std::string, bool> seen;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') detail::bad("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            bool known = false;
            for (const auto& f : detail::fields()) known = known || f.section == section;
            if (!known) detail::bad(section + ": unknown section");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) detail::bad("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (section.empty()) detail::bad(key + ": key outside any section");
        const std::string name = section + "." + key;
        const detail::Field* field = nullptr;
        for (const auto& f : detail::fields())
            if (f.section == section && f.key == key) field = &f;
        if (!field) detail::bad(name + ": unknown key");
        if (seen[name]) detail::bad(name + ": duplicate key");
        seen[name] = true;
        field->parse(c, value);
    }
    validate_config(c);
    return c;
}

/// Canonical text: every section and key in fixed order.
inline std::string emit_config(const RunConfig& c) {
    std::string out, section;
    for (const auto& f : detail::fields()) {
        if (f.section != section) {
            if (!section.empty()) out += "\n";
            section = f.section;
            out += "[" + section + "]\n";
        }
        out += f.key + " = " + f.emit(c) + "\n";
    }
    return out;
}

/// 64-bit FNV-1a over the given text, as 16 hex digits.
inline std::string text_hash(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_hash(const RunConfig& c) { return text_hash(emit_config(c)); }

/// Hash of the sections a calibration depends on (protocol and noise excluded).
inline std::string physics_hash(const RunConfig& c) {
    std::string text;
    for (const auto& f : detail::fields())
        if (f.section != "protocol" && f.section != "noise") text += f.section + "." + f.key + "=" + f.emit(c) + "\n";
    return text_hash(text);
}

inline Simulation uncalibrated_simulation(const RunConfig& c, const ModeField& mode) {
    Simulation sim;
    sim.calib = calibration_from_mode(mode, c.magnet.radius, c.material, c.b_static,
                                      {c.coupling.q_ext, c.kinetic_fraction}, c.solver.perturbation_average);
    sim.thermal = c.thermal;
    return sim;
}

}  // namespace levicav
