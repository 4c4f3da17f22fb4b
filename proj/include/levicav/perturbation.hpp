#pragma once

// Frequency shift caused by a small perfectly conducting sphere (the magnet) placed in the
// mode, from the small-sphere polarisabilities, and the inverse map from a measured
// frequency back to levitation height.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "levicav/mode_solver.hpp"

namespace levicav {

struct SpherePolarizability {
    double alpha_e = 0.0;  // 4 pi eps0 a^3
    double alpha_m = 0.0;  // 2 pi mu0 a^3, diamagnetic
};

inline SpherePolarizability sphere_polarizabilities(double a, const PhysicalConstants& k = constants()) {
    if (!(a > 0)) throw DomainError("sphere_polarizabilities: radius must be > 0");
    const double a3 = a * a * a;
    return {4.0 * std::numbers::pi * k.eps0 * a3, 2.0 * std::numbers::pi * k.mu0 * a3};
}

/// Magnet position: radial offset from the axis and height of the sphere centre above the
/// stub-top plane. Contact with the stub top means z_above_stub == sphere radius.
struct MagnetPosition {
    double x = 0.0;
    double z_above_stub = 0.0;
};

class InfeasiblePosition : public DomainError {
public:
    using DomainError::DomainError;
};

/// Throws InfeasiblePosition naming the violated clearance when the sphere would touch metal.
inline void check_clearance(const CavityGeometry& g, double a, const MagnetPosition& p) {
    const double z = g.stub_height + p.z_above_stub;
    const double x = std::abs(p.x);
    const double eps = 1e-12;
    if (x + a > g.outer_radius + eps) throw InfeasiblePosition("sphere intersects outer wall");
    if (z + a > g.outer_height + eps) throw InfeasiblePosition("sphere intersects lid");
    if (z - a < -eps) throw InfeasiblePosition("sphere intersects floor");
    // Distance from the centre to the stub (solid cylinder r <= stub_radius, z <= stub_height).
    const double dx = std::max(x - g.stub_radius, 0.0);
    const double dz = std::max(z - g.stub_height, 0.0);
    if (std::hypot(dx, dz) < a - eps) throw InfeasiblePosition("sphere intersects stub");
}

/// Parts of the shift, kept separate so each polarisability's contribution can be checked.
struct ShiftTerms {
    double magnetic = 0.0;  // f0 alpha_m |H|^2 / (4 U)
    double electric = 0.0;  // -f0 alpha_e |E|^2 / (4 U)
    [[nodiscard]] double total() const { return magnetic + electric; }
};

enum class PerturbationAverage { Center, Volume };

namespace detail {

inline FieldSample averaged_field_sq(const ModeField& m, double x, double z, double a, PerturbationAverage avg) {
    if (avg == PerturbationAverage::Center) return field_at(m, x, z);
    // Midpoint rule over a 12^3 lattice clipped to the ball; the result is returned as a
    // sample whose magnitudes square to the volume means of |E|^2 and |H|^2.
    constexpr int n = 12;
    double e2 = 0.0, h2 = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const double u = a * (2.0 * (i + 0.5) / n - 1.0);
                const double v = a * (2.0 * (j + 0.5) / n - 1.0);
                const double w = a * (2.0 * (l + 0.5) / n - 1.0);
                if (u * u + v * v + w * w > a * a) continue;
                const auto s = field_at(m, std::hypot(x + u, v), z + w);
                e2 += s.e_abs() * s.e_abs();
                h2 += s.h_phi * s.h_phi;
                ++count;
            }
    return {std::sqrt(e2 / count), 0.0, std::sqrt(h2 / count)};
}

}  // namespace detail

inline ShiftTerms slater_terms(const ModeField& m, const MagnetPosition& pos, double radius, const SpherePolarizability& pol,
                               PerturbationAverage avg = PerturbationAverage::Center) {
    check_clearance(m.geometry, radius, pos);
    const auto f = detail::averaged_field_sq(m, std::abs(pos.x), m.geometry.stub_height + pos.z_above_stub, radius, avg);
    const double scale = m.f0 / (4.0 * m.stored_energy);
    return {scale * pol.alpha_m * f.h_abs() * f.h_abs(), -scale * pol.alpha_e * f.e_abs() * f.e_abs()};
}

/// Slater shift f0 (alpha_m |H|^2 - alpha_e |E|^2) / (4 U) for a sphere of the given radius.
inline double slater_shift(const ModeField& m, const MagnetPosition& pos, double radius,
                           PerturbationAverage avg = PerturbationAverage::Center) {
    return slater_terms(m, pos, radius, sphere_polarizabilities(radius), avg).total();
}

struct ShiftMap {
    std::vector<double> x_coords;
    std::vector<double> z_coords;
    std::vector<std::optional<double>> delta_f;  // x-major: index ix * z_coords.size() + iz; empty = infeasible
    double f0_ref = 0.0;
    double magnet_radius = 0.0;

    [[nodiscard]] std::optional<double> at(std::size_t ix, std::size_t iz) const { return delta_f[ix * z_coords.size() + iz]; }
    [[nodiscard]] double max_relative_shift() const {
        double mx = 0.0;
        for (const auto& v : delta_f)
            if (v) mx = std::max(mx, std::abs(*v) / f0_ref);
        return mx;
    }
};

struct RegionOfInterest {
    double x_min = 0.0, x_max = 0.5e-3;
    double z_min = 0.1e-3, z_max = 1.5e-3;
    [[nodiscard]] bool contains(double x, double z) const { return x >= x_min && x <= x_max && z >= z_min && z <= z_max; }
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

/// Shift over a rectangular (x, z) lattice. Cells where the sphere touches metal are left empty.
inline ShiftMap shift_map(const ModeField& m, std::vector<double> xs, std::vector<double> zs, double radius,
                          PerturbationAverage avg = PerturbationAverage::Center) {
    ShiftMap map;
    map.x_coords = std::move(xs);
    map.z_coords = std::move(zs);
    map.f0_ref = m.f0;
    map.magnet_radius = radius;
    map.delta_f.resize(map.x_coords.size() * map.z_coords.size());
    const auto pol = sphere_polarizabilities(radius);
    for (std::size_t ix = 0; ix < map.x_coords.size(); ++ix)
        for (std::size_t iz = 0; iz < map.z_coords.size(); ++iz) {
            const MagnetPosition p{map.x_coords[ix], map.z_coords[iz]};
            try {
                map.delta_f[ix * map.z_coords.size() + iz] = slater_terms(m, p, radius, pol, avg).total();
            } catch (const InfeasiblePosition&) {
            }
        }
    return map;
}

/// Shift along the axis as a function of height, the calibration curve used for inversion.
struct HeightCurve {
    std::vector<double> z;   // strictly increasing
    std::vector<double> df;  // shift at each z

    [[nodiscard]] double at(double zq) const {
        auto it = std::upper_bound(z.begin(), z.end(), zq);
        std::size_t i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - z.begin() - 1, 0, static_cast<std::ptrdiff_t>(z.size()) - 2));
        const double t = (zq - z[i]) / (z[i + 1] - z[i]);
        return df[i] + t * (df[i + 1] - df[i]);
    }
};

inline HeightCurve axis_curve(const ShiftMap& map, std::size_t ix = 0) {
    HeightCurve c;
    for (std::size_t iz = 0; iz < map.z_coords.size(); ++iz)
        if (auto v = map.at(ix, iz)) {
            c.z.push_back(map.z_coords[iz]);
            c.df.push_back(*v);
        }
    return c;
}

class InversionError : public std::runtime_error {
public:
    explicit InversionError(const std::string& what, std::vector<std::pair<double, double>> intervals = {})
        : std::runtime_error(what), candidates(std::move(intervals)) {}
    std::vector<std::pair<double, double>> candidates;
};

struct HeightEstimate {
    double z = 0.0;
    bool in_region = true;
};

/// Height whose calibrated shift matches f_meas - f0_ref, by bisection on the piecewise-linear curve.
inline HeightEstimate invert_height(double f_meas, const HeightCurve& curve, double f0_ref,
                                    const RegionOfInterest& roi = {}, double x = 0.0) {
    if (curve.z.size() < 2 || curve.z.size() != curve.df.size()) throw InversionError("calibration curve needs >= 2 points");
    const auto [lo_it, hi_it] = std::minmax_element(curve.df.begin(), curve.df.end());
    // 1 Hz slack absorbs rounding in f_meas - f0_ref at the band edges.
    const double raw = f_meas - f0_ref;
    if (raw < *lo_it - 1.0 || raw > *hi_it + 1.0) throw InversionError("frequency outside calibrated band");
    const double target = std::clamp(raw, *lo_it, *hi_it);

    // Every segment bracketing the target; more than one means the curve folds back.
    std::vector<std::pair<double, double>> brackets;
    for (std::size_t i = 0; i + 1 < curve.z.size(); ++i) {
        const double a = curve.df[i] - target, b = curve.df[i + 1] - target;
        if (a == 0.0 && i > 0 && !brackets.empty() && brackets.back().second == curve.z[i]) continue;
        if ((a <= 0 && b >= 0) || (a >= 0 && b <= 0)) brackets.emplace_back(curve.z[i], curve.z[i + 1]);
    }
    bool monotone = true;
    const bool rising = curve.df.back() > curve.df.front();
    for (std::size_t i = 0; i + 1 < curve.df.size(); ++i)
        if (rising ? !(curve.df[i + 1] > curve.df[i]) : !(curve.df[i + 1] < curve.df[i])) monotone = false;
    if (!monotone && brackets.size() > 1) throw InversionError("ambiguous inversion", brackets);

    double lo = brackets.front().first, hi = brackets.front().second;
    const double s_lo = curve.at(lo) - target;
    // Stop when the residual is below 1 Hz or the bracket has collapsed to rounding.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = curve.at(mid) - target;
        if (std::abs(r) < 1.0 || hi - lo < 1e-15) {
            lo = hi = mid;
            break;
        }
        if ((r < 0) == (s_lo < 0)) lo = mid;
        else hi = mid;
    }
    const double z = 0.5 * (lo + hi);
    return {z, roi.contains(x, z)};
}

}  // namespace levicav
