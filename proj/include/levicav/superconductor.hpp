#pragma once

// Two-fluid description of the cavity walls: condensate fraction, London depth,
// RF pair breaking, surface impedance and the lumped LC resonance.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "levicav/units.hpp"

namespace levicav {

struct SuperconductorState {
    double temperature = 0.0;
    double pair_fraction = 0.0;
    double lambda = 0.0;  // infinite in the normal state
    double surface_resistance = 0.0;
    double surface_reactance = 0.0;
    bool is_superconducting = false;
};

/// Lumped-element view of the resonance: f = 1 / (2 pi sqrt((L_g + L_k) C)).
struct InductanceBudget {
    double l_geom = 0.0;
    double l_kin = 0.0;
    double c_eff = 0.0;

    [[nodiscard]] double l_total() const { return l_geom + l_kin; }
};

struct SurfaceImpedance {
    double r_s = 0.0;
    double x_s = 0.0;
};

/// n_s/n = 1 - (t/t_c)^4, clamped to [0, 1].
inline double superfluid_fraction(double t, double t_c) {
    if (!(t >= 0.0)) throw DomainError("superfluid_fraction: temperature must be >= 0");
    if (!(t_c > 0.0)) throw DomainError("superfluid_fraction: t_c must be > 0");
    if (t >= t_c) return 0.0;
    const double r = t / t_c;
    const double r2 = r * r;
    return std::clamp(1.0 - r2 * r2, 0.0, 1.0);
}

/// SI London depth sqrt(m_e / (mu0 n_s e^2)) for an absolute pair density n_s [m^-3].
inline double london_depth(double n_s, const PhysicalConstants& k = constants()) {
    if (!(n_s > 0.0)) throw DomainError("london_depth: pair density must be > 0");
    return std::sqrt(k.m_e / (k.mu0 * n_s * k.e_charge * k.e_charge));
}

inline double penetration_depth(double t, const MaterialParams& mat) {
    if (!(t >= 0.0)) throw DomainError("penetration_depth: temperature must be >= 0");
    if (t >= mat.t_c) throw DomainError("normal state: penetration depth undefined");
    return mat.lambda0 / std::sqrt(superfluid_fraction(t, mat.t_c));
}

/// Thermodynamic critical field b_c0 (1 - (t/t_c)^2); zero at and above t_c.
inline double critical_field(double t, const MaterialParams& mat) {
    if (t >= mat.t_c) return 0.0;
    const double r = t / mat.t_c;
    return mat.b_c0 * (1.0 - r * r);
}

/// Condensate fraction suppressed quadratically by the peak RF field.
inline double effective_pair_density(double t, double b_rf_peak, const MaterialParams& mat) {
    if (!(b_rf_peak >= 0.0)) throw DomainError("effective_pair_density: field must be >= 0");
    if (t >= mat.t_c) return 0.0;
    const double bc = critical_field(t, mat);
    const double u = b_rf_peak / bc;
    return superfluid_fraction(t, mat.t_c) * std::max(0.0, 1.0 - u * u);
}

/// Material as seen under a static applied field b_static (the levitated magnet's field at the wall).
///
/// The headroom b_c(t) - b_static is again parabolic in t, with a depressed critical
/// temperature t_c sqrt(1 - b_static/b_c0) and zero-temperature value b_c0 - b_static.
/// Feeding the returned record to the functions above therefore models the field-loaded wall
/// without changing their form.
inline MaterialParams field_loaded(const MaterialParams& mat, double b_static) {
    if (!(b_static >= 0.0) || !(b_static < mat.b_c0))
        throw DomainError("field_loaded: static field must lie in [0, b_c0)");
    MaterialParams out = mat;
    out.t_c = mat.t_c * std::sqrt(1.0 - b_static / mat.b_c0);
    out.b_c0 = mat.b_c0 - b_static;
    return out;
}

/// Normal-metal skin-effect surface resistance sqrt(omega mu0 / (2 sigma_n)).
inline double normal_surface_resistance(double f, const MaterialParams& mat,
                                        const PhysicalConstants& k = constants()) {
    const double omega = 2.0 * std::numbers::pi * f;
    return std::sqrt(omega * k.mu0 / (2.0 * mat.sigma_n));
}

inline SurfaceImpedance surface_impedance(double t, double f, double b_rf_peak, const MaterialParams& mat,
                                          const PhysicalConstants& k = constants()) {
    if (!(f > 0.0)) throw DomainError("surface_impedance: frequency must be > 0");
    const double x_s = effective_pair_density(t, b_rf_peak, mat);
    if (x_s <= 0.0) {
        const double r = normal_surface_resistance(f, mat, k);
        return {r, r};
    }
    const double omega = 2.0 * std::numbers::pi * f;
    const double lambda_eff = mat.lambda0 / std::sqrt(x_s);
    const std::complex<double> sigma{mat.sigma_n * (1.0 - x_s), -1.0 / (omega * k.mu0 * lambda_eff * lambda_eff)};
    const std::complex<double> z = std::sqrt(std::complex<double>{0.0, omega * k.mu0} / sigma);
    return {z.real() + mat.r_res, z.imag()};
}

/// Full state record at one operating point.
inline SuperconductorState superconductor_state(double t, double f, double b_rf_peak, const MaterialParams& mat,
                                                const PhysicalConstants& k = constants()) {
    SuperconductorState s;
    s.temperature = t;
    s.pair_fraction = effective_pair_density(t, b_rf_peak, mat);
    s.is_superconducting = t < mat.t_c && s.pair_fraction > 0.0;
    s.lambda = s.is_superconducting ? mat.lambda0 / std::sqrt(s.pair_fraction)
                                    : std::numeric_limits<double>::infinity();
    const auto z = surface_impedance(t, f, b_rf_peak, mat, k);
    s.surface_resistance = z.r_s;
    s.surface_reactance = z.x_s;
    return s;
}

/// L_k scales linearly with the penetration length, anchored at lambda_ref.
inline double kinetic_inductance(double lambda_eff, const InductanceBudget& budget, double lambda_ref) {
    if (!(lambda_eff > 0.0) || !(lambda_ref > 0.0))
        throw DomainError("kinetic_inductance: lengths must be > 0");
    return budget.l_kin * (lambda_eff / lambda_ref);
}

inline double resonant_frequency_lumped(const InductanceBudget& b) {
    if (!(b.l_geom >= 0.0) || !(b.l_kin >= 0.0) || !(b.l_total() > 0.0) || !(b.c_eff > 0.0))
        throw DomainError("resonant_frequency_lumped: L and C must be positive");
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(b.l_total() * b.c_eff));
}

/// Budget whose zero-temperature resonance is f_ref, with line impedance z_line and
/// kinetic fraction alpha = L_k / (L_g + L_k) at the anchor.
inline InductanceBudget make_budget(double f_ref, double z_line, double alpha) {
    if (!(f_ref > 0) || !(z_line > 0) || !(alpha >= 0 && alpha < 1))
        throw DomainError("make_budget: need f_ref, z_line > 0 and alpha in [0, 1)");
    const double omega = 2.0 * std::numbers::pi * f_ref;
    const double l_total = z_line / omega;
    return {l_total * (1.0 - alpha), l_total * alpha, 1.0 / (z_line * omega)};
}

}  // namespace levicav
