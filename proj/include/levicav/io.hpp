#pragma once

// CSV emission and ingestion for every artifact the command line produces.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "levicav/calibration.hpp"
#include "levicav/config.hpp"
#include "levicav/experiment.hpp"
#include "levicav/perturbation.hpp"
#include "levicav/resonance.hpp"

namespace levicav {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes the whole file; an existing file is replaced only with `force`.
inline void write_text(const std::filesystem::path& p, const std::string& text, bool force) {
    if (std::filesystem::exists(p) && !force) throw IoError("refusing to overwrite " + p.string() + " (use --force)");
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
}

/// Comment block opening every output file: producer, config hash, full config echo, extras.
inline std::string provenance_header(const std::string& producer, const RunConfig& cfg,
                                     const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::string h = "# producer = " + producer + "\n";
    h += "# config_hash = " + config_hash(cfg) + "\n";
    for (const auto& [k, v] : extra) h += "# " + k + " = " + v + "\n";
    std::istringstream in(emit_config(cfg));
    std::string line;
    while (std::getline(in, line)) h += "#   " + line + "\n";
    return h;
}

struct CsvTable {
    std::map<std::string, std::string> meta;  // "# key = value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw IoError("missing column " + name);
    }
    [[nodiscard]] bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                const std::string key = detail::trim(std::string_view(line).substr(1, eq - 1));
                if (!key.empty() && !t.meta.count(key)) t.meta[key] = detail::trim(std::string_view(line).substr(eq + 1));
            }
            continue;
        }
        auto cells = detail::split(line, ',');
        if (t.columns.empty()) t.columns = std::move(cells);
        else {
            if (cells.size() != t.columns.size()) throw IoError("ragged CSV row: " + line);
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.columns.empty()) throw IoError("CSV has no header row");
    return t;
}

inline double cell_double(const std::string& s, const std::string& what) {
    double v;
    if (!detail::parse_double(s, v)) throw IoError("bad number in " + what + ": '" + s + "'");
    return v;
}

// ---- sweep records

inline std::string sweep_csv(const std::vector<SweepRecord>& recs) {
    std::string s = "time_s,t_bath_k,t_eff_k,p_in_dbm,f0_hz,q_loaded,q_int,state,trapped_flux_r_ohm\n";
    for (const auto& r : recs)
        s += fmt_double(r.time) + "," + fmt_double(r.t_bath) + "," + fmt_double(r.t_eff) + "," + fmt_double(r.p_in) + "," +
             fmt_double(r.f0) + "," + fmt_double(r.q_loaded) + "," + fmt_double(r.q_int) + "," + to_string(r.state) + "," +
             fmt_double(r.trapped_flux_r) + "\n";
    return s;
}

inline std::vector<SweepRecord> read_sweep(const std::string& text) {
    const auto t = parse_csv(text);
    std::vector<SweepRecord> out;
    const auto c_state = t.column("state");
    for (const auto& row : t.rows) {
        SweepRecord r;
        r.time = cell_double(row[t.column("time_s")], "time_s");
        r.t_bath = cell_double(row[t.column("t_bath_k")], "t_bath_k");
        r.t_eff = cell_double(row[t.column("t_eff_k")], "t_eff_k");
        r.p_in = cell_double(row[t.column("p_in_dbm")], "p_in_dbm");
        r.f0 = cell_double(row[t.column("f0_hz")], "f0_hz");
        r.q_loaded = cell_double(row[t.column("q_loaded")], "q_loaded");
        r.q_int = cell_double(row[t.column("q_int")], "q_int");
        const auto& st = row[c_state];
        r.state = st == "SC" ? RecordState::SC : st == "Normal" ? RecordState::Normal : RecordState::Bistable;
        r.trapped_flux_r = cell_double(row[t.column("trapped_flux_r_ohm")], "trapped_flux_r_ohm");
        out.push_back(r);
    }
    return out;
}

// ---- S21 traces

inline std::string trace_csv(const S21Trace& tr) {
    std::string s = "# power_dbm = " + fmt_double(tr.meta.power_dbm) + "\n";
    s += "# temperature_k = " + fmt_double(tr.meta.temperature_k) + "\n";
    s += "# timestamp_s = " + fmt_double(tr.meta.timestamp_s) + "\n";
    s += "freq_hz,re_s21,im_s21\n";
    for (std::size_t i = 0; i < tr.freqs.size(); ++i)
        s += fmt_double(tr.freqs[i]) + "," + fmt_double(tr.s21[i].real()) + "," + fmt_double(tr.s21[i].imag()) + "\n";
    return s;
}

/// Accepts freq_hz with either re_s21/im_s21 or mag_db/phase_rad.
inline S21Trace read_trace(const std::string& text) {
    const auto t = parse_csv(text);
    S21Trace tr;
    auto meta = [&](const char* k) { return t.meta.count(k) ? cell_double(t.meta.at(k), k) : 0.0; };
    tr.meta = {meta("power_dbm"), meta("temperature_k"), meta("timestamp_s")};
    const auto cf = t.column("freq_hz");
    const bool cartesian = t.has_column("re_s21") && t.has_column("im_s21");
    if (!cartesian && !(t.has_column("mag_db") && t.has_column("phase_rad")))
        throw IoError("trace needs re_s21,im_s21 or mag_db,phase_rad columns");
    const auto ca = t.column(cartesian ? "re_s21" : "mag_db");
    const auto cb = t.column(cartesian ? "im_s21" : "phase_rad");
    for (const auto& row : t.rows) {
        tr.freqs.push_back(cell_double(row[cf], "freq_hz"));
        const double a = cell_double(row[ca], "trace"), b = cell_double(row[cb], "trace");
        tr.s21.push_back(cartesian ? cplx(a, b) : std::polar(std::pow(10.0, a / 20.0), b));
    }
    return tr;
}

// ---- fit reports

inline std::string fit_report_csv(const std::vector<std::pair<std::string, FitReport>>& reps) {
    std::string s = "trace,f0_hat_hz,q_loaded_hat,q_ext_hat,transmission_hat,residual_rms,sigma_f0_hz,sigma_q_loaded,"
                    "sigma_transmission,iterations,converged,span_warning\n";
    for (const auto& [name, r] : reps)
        s += name + "," + fmt_double(r.f0_hat) + "," + fmt_double(r.q_loaded_hat) + "," + fmt_double(r.q_ext_hat) + "," +
             fmt_double(r.transmission_hat) + "," + fmt_double(r.residual_rms) + "," + fmt_double(r.sigma_f0) + "," +
             fmt_double(r.sigma_q_loaded) + "," + fmt_double(r.sigma_transmission) + "," + std::to_string(r.iterations) + "," +
             (r.converged ? "true" : "false") + "," + (r.span_warning ? "true" : "false") + "\n";
    return s;
}

// ---- shift maps

inline std::string shift_map_csv(const ShiftMap& m) {
    std::string s = "# f0_ref_hz = " + fmt_double(m.f0_ref) + "\n# magnet_radius_m = " + fmt_double(m.magnet_radius) + "\n";
    s += "x_m,z_m,delta_f_hz\n";
    for (std::size_t ix = 0; ix < m.x_coords.size(); ++ix)
        for (std::size_t iz = 0; iz < m.z_coords.size(); ++iz) {
            const auto v = m.at(ix, iz);
            s += fmt_double(m.x_coords[ix]) + "," + fmt_double(m.z_coords[iz]) + "," + (v ? fmt_double(*v) : std::string()) + "\n";
        }
    return s;
}

inline ShiftMap read_shift_map(const std::string& text) {
    const auto t = parse_csv(text);
    ShiftMap m;
    if (!t.meta.count("f0_ref_hz")) throw IoError("shift map lacks f0_ref_hz");
    m.f0_ref = cell_double(t.meta.at("f0_ref_hz"), "f0_ref_hz");
    m.magnet_radius = t.meta.count("magnet_radius_m") ? cell_double(t.meta.at("magnet_radius_m"), "magnet_radius_m") : 0.0;
    const auto cx = t.column("x_m"), cz = t.column("z_m"), cd = t.column("delta_f_hz");
    for (const auto& row : t.rows) {
        const double x = cell_double(row[cx], "x_m"), z = cell_double(row[cz], "z_m");
        if (m.x_coords.empty() || m.x_coords.back() != x) m.x_coords.push_back(x);
        if (m.x_coords.size() == 1) m.z_coords.push_back(z);
        m.delta_f.push_back(row[cd].empty() ? std::nullopt : std::optional<double>(cell_double(row[cd], "delta_f_hz")));
    }
    if (m.delta_f.size() != m.x_coords.size() * m.z_coords.size()) throw IoError("shift map is not a full lattice");
    return m;
}

// ---- calibration artifacts

inline std::string calibration_csv(const SystemCalibration& c, const ThermalParams& th, const std::string& physics) {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"physics_hash", physics},
        {"f0_ref_hz", fmt_double(c.f0_ref)},
        {"geometry_factor_ohm", fmt_double(c.geometry_factor)},
        {"wall_h_per_sqrt_j", fmt_double(c.wall_h_per_sqrt_j)},
        {"b_c0_t", fmt_double(c.material.b_c0)},
        {"b_static_t", fmt_double(c.b_static)},
        {"t_c_loaded_k", fmt_double(c.wall().t_c)},
        {"kinetic_fraction", fmt_double(c.kinetic_fraction)},
        {"q_ext", fmt_double(c.q_ext)},
        {"r_th_k_per_w", fmt_double(th.r_th)},
    };
    std::string s = "key,value\n";
    for (const auto& [k, v] : kv) s += k + "," + v + "\n";
    return s;
}

inline std::string magnet_curve_csv(const HeightCurve& h) {
    std::string s = "z_m,delta_f_hz\n";
    for (std::size_t i = 0; i < h.z.size(); ++i) s += fmt_double(h.z[i]) + "," + fmt_double(h.df[i]) + "\n";
    return s;
}

/// Rebuilds the calibrated simulation from the calibrate command's two files.
inline Simulation read_calibration(const std::string& calib_text, const std::string& curve_text, const RunConfig& cfg) {
    const auto t = parse_csv(calib_text);
    std::map<std::string, std::string> kv;
    for (const auto& row : t.rows) kv[row.at(t.column("key"))] = row.at(t.column("value"));
    auto get = [&](const char* k) {
        if (!kv.count(k)) throw IoError(std::string("calibration lacks ") + k);
        return cell_double(kv.at(k), k);
    };
    if (!kv.count("physics_hash") || kv.at("physics_hash") != physics_hash(cfg))
        throw ConfigError("calibration does not match the config: run cmd_calibrate first");
    Simulation sim;
    sim.thermal = cfg.thermal;
    sim.thermal.r_th = get("r_th_k_per_w");
    auto& c = sim.calib;
    c.f0_ref = get("f0_ref_hz");
    c.geometry_factor = get("geometry_factor_ohm");
    c.wall_h_per_sqrt_j = get("wall_h_per_sqrt_j");
    c.material = cfg.material;
    c.material.b_c0 = get("b_c0_t");
    c.b_static = get("b_static_t");
    c.kinetic_fraction = get("kinetic_fraction");
    c.q_ext = get("q_ext");
    const auto ct = parse_csv(curve_text);
    for (const auto& row : ct.rows) {
        c.magnet_curve.z.push_back(cell_double(row[ct.column("z_m")], "z_m"));
        c.magnet_curve.df.push_back(cell_double(row[ct.column("delta_f_hz")], "delta_f_hz"));
    }
    finish_calibration(c);
    return sim;
}

}  // namespace levicav
