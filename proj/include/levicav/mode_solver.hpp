#pragma once

// Axisymmetric (m = 0, TM-type: E_r, E_z, H_phi) eigenmodes of a closed, perfectly
// conducting body of revolution, discretised with the finite integration technique on a
// staggered (r, z) grid.
//
// Layout, for cell (i, j) covering [i dr, (i+1) dr] x [j dz, (j+1) dz]:
//   H_phi   at the cell centre            -> nr x nz
//   E_r     on horizontal edges (i, z_j)  -> nr x (nz + 1)
//   E_z     on vertical edges (r_i, j)    -> (nr + 1) x nz
// A cell is metal when its centre lies outside the vacuum region. An E edge carries a
// degree of freedom only when every cell it borders is vacuum (the axis edges border a
// single cell), so tangential E vanishes on all walls by construction. Eliminating E gives
// the symmetric pencil  C Meps^-1 C^T h = omega^2 Mmu h  for the H circulations.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "levicav/eigensolver.hpp"
#include "levicav/units.hpp"

namespace levicav {

struct GridSpec {
    double dr = 1e-4;
    double dz = 1e-4;
    int nr = 0;
    int nz = 0;
};

/// Smallest grid with the requested spacings that covers the cavity.
inline GridSpec make_grid(const CavityGeometry& g, double dr, double dz) {
    if (!(dr > 0) || !(dz > 0)) throw DomainError("make_grid: spacings must be > 0");
    GridSpec s{dr, dz, 0, 0};
    s.nr = static_cast<int>(std::ceil(g.outer_radius / dr - 1e-9));
    s.nz = static_cast<int>(std::ceil(g.outer_height / dz - 1e-9));
    return s;
}

/// Perfectly conducting sphere centred on the axis; lets the solver mesh the magnet directly.
struct AxisSphere {
    double z_center = 0.0;  // absolute z (floor at 0)
    double radius = 0.0;
};

/// Decay model above the stub: fields ~ exp(-beta (z - z_ref)).
struct EvanescentModel {
    double beta = 0.0;
    double z_ref = 0.0;
};

enum class BetaMode { TM01, TE11 };

struct ModeField {
    CavityGeometry geometry;
    GridSpec grid;
    double f0 = 0.0;
    std::vector<double> e_r;    // nr x (nz+1), index i * (nz+1) + j
    std::vector<double> e_z;    // (nr+1) x nz, index i * nz + j
    std::vector<double> h_phi;  // nr x nz,     index i * nz + j
    std::vector<char> vacuum;   // nr x nz
    double stored_energy = 0.0;
    double eigen_residual = 0.0;
    std::vector<double> higher_frequencies;  // further m = 0 eigenfrequencies found, ascending

    [[nodiscard]] double r_center(int i) const { return (i + 0.5) * grid.dr; }
    [[nodiscard]] double z_center(int j) const { return (j + 0.5) * grid.dz; }
    [[nodiscard]] bool is_vacuum(int i, int j) const {
        return i >= 0 && j >= 0 && i < grid.nr && j < grid.nz && vacuum[static_cast<std::size_t>(i) * grid.nz + j];
    }
    [[nodiscard]] double h(int i, int j) const { return h_phi[static_cast<std::size_t>(i) * grid.nz + j]; }
    [[nodiscard]] double er(int i, int j) const { return e_r[static_cast<std::size_t>(i) * (grid.nz + 1) + j]; }
    [[nodiscard]] double ez(int i, int j) const { return e_z[static_cast<std::size_t>(i) * grid.nz + j]; }
};

/// Line length equivalent to the open-end capacitance of the stub: dl = C_end Z_line c.
///
/// C_end is the parallel-plate capacitance to the lid plus the fringe of one face of a free
/// disk (4 eps0 a). The plate term alone is a few fF for a tall cavity and badly
/// underestimates the loading.
inline double end_correction_length(const CavityGeometry& g, const PhysicalConstants& k = constants()) {
    const double c_top = k.eps0 * std::numbers::pi * g.stub_radius * g.stub_radius / (g.outer_height - g.stub_height) +
                         4.0 * k.eps0 * g.stub_radius;
    const double z_line = k.z0() / (2.0 * std::numbers::pi) * std::log(g.outer_radius / g.stub_radius);
    return c_top * z_line * k.c;
}

inline double analytic_coax_estimate(const CavityGeometry& g, const PhysicalConstants& k = constants(),
                                     bool with_end_correction = true) {
    const double dl = with_end_correction ? end_correction_length(g, k) : 0.0;
    return k.c / (4.0 * (g.stub_height + dl));
}

inline constexpr double kBesselJ0Zero = 2.404825557695773;
inline constexpr double kBesselJ1PrimeZero = 1.841183781340659;

inline double evanescent_beta(double f, const CavityGeometry& g, const PhysicalConstants& k = constants(),
                              BetaMode mode = BetaMode::TM01) {
    const double kc = (mode == BetaMode::TM01 ? kBesselJ0Zero : kBesselJ1PrimeZero) / g.outer_radius;
    const double k0 = 2.0 * std::numbers::pi * f / k.c;
    if (!(f >= 0.0) || k0 > kc * (1.0 + 1e-15)) throw DomainError("mode propagates; no evanescent decay");
    return std::sqrt(std::max(kc * kc - k0 * k0, 0.0));
}

inline EvanescentModel evanescent_model(double f, const CavityGeometry& g, const PhysicalConstants& k = constants(),
                                        BetaMode mode = BetaMode::TM01) {
    return {evanescent_beta(f, g, k, mode), g.stub_height};
}

namespace detail {

struct Discretisation {
    Eigen::SparseMatrix<double> a;  // C Meps^-1 C^T, scaled by 1/eps0
    Eigen::VectorXd m;              // Mmu, scaled by 1/mu0
    std::vector<int> cell_dof;      // -1 for metal
    std::vector<char> vacuum;
};

inline bool cell_is_vacuum(const CavityGeometry& g, const std::vector<AxisSphere>& obstacles, double r, double z) {
    if (r > g.outer_radius || z > g.outer_height) return false;
    if (r < g.stub_radius && z < g.stub_height) return false;
    for (const auto& s : obstacles)
        if (r * r + (z - s.z_center) * (z - s.z_center) < s.radius * s.radius) return false;
    return true;
}

inline Discretisation discretise(const CavityGeometry& g, const GridSpec& grid, const std::vector<AxisSphere>& obstacles) {
    const int nr = grid.nr, nz = grid.nz;
    const double dr = grid.dr, dz = grid.dz;
    const double two_pi = 2.0 * std::numbers::pi;
    Discretisation d;
    d.vacuum.assign(static_cast<std::size_t>(nr) * nz, 0);
    d.cell_dof.assign(static_cast<std::size_t>(nr) * nz, -1);
    int ndof = 0;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j)
            if (cell_is_vacuum(g, obstacles, (i + 0.5) * dr, (j + 0.5) * dz)) {
                d.vacuum[static_cast<std::size_t>(i) * nz + j] = 1;
                d.cell_dof[static_cast<std::size_t>(i) * nz + j] = ndof++;
            }
    auto dof = [&](int i, int j) -> int {
        if (i < 0 || j < 0 || i >= nr || j >= nz) return -1;
        return d.cell_dof[static_cast<std::size_t>(i) * nz + j];
    };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(ndof) * 5);
    // Each free edge e adds c_e c_e^T / Meps_e, c_e holding the +-1 circulation signs.
    auto add_edge = [&](int p, double sp, int q, double sq, double inv_meps) {
        trip.emplace_back(p, p, sp * sp * inv_meps);
        if (q >= 0) {
            trip.emplace_back(q, q, sq * sq * inv_meps);
            trip.emplace_back(p, q, sp * sq * inv_meps);
            trip.emplace_back(q, p, sp * sq * inv_meps);
        }
    };
    // E_r edge (i, j): below cell (i, j-1) as its top (-1), above cell (i, j) as its bottom (+1).
    for (int i = 0; i < nr; ++i) {
        const double meps = two_pi * (i + 0.5) * dr * dz / dr;
        for (int j = 1; j < nz; ++j) {
            const int lo = dof(i, j - 1), hi = dof(i, j);
            if (lo >= 0 && hi >= 0) add_edge(lo, -1.0, hi, 1.0, 1.0 / meps);
        }
    }
    // E_z edge (i, j): right side of cell (i-1, j) (+1), left side of cell (i, j) (-1).
    for (int j = 0; j < nz; ++j) {
        const int axis = dof(0, j);
        if (axis >= 0) add_edge(axis, -1.0, -1, 0.0, dz / (std::numbers::pi * 0.25 * dr * dr));
        for (int i = 1; i < nr; ++i) {
            const int left = dof(i - 1, j), right = dof(i, j);
            if (left >= 0 && right >= 0) add_edge(left, 1.0, right, -1.0, dz / (two_pi * i * dr * dr));
        }
    }
    d.a.resize(ndof, ndof);
    d.a.setFromTriplets(trip.begin(), trip.end());
    d.m.resize(ndof);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j) {
            const int p = dof(i, j);
            if (p >= 0) d.m[p] = dr * dz / (two_pi * (i + 0.5) * dr);
        }
    return d;
}

}  // namespace detail

struct ModeSolveOptions {
    int modes = 2;                    // how many of the lowest modes to certify
    double residual_limit = 1e-8;
    std::optional<double> target_hz;  // shift target; defaults to the analytic estimate
};

/// Lowest m = 0 modes; result[0] is the fundamental. Fields normalised to 1 J stored energy.
std::vector<ModeField> solve_modes(const CavityGeometry& g, const GridSpec& grid,
                                   const std::vector<AxisSphere>& obstacles = {},
                                   const ModeSolveOptions& opt = {}, const PhysicalConstants& k = constants());

inline double stored_energy(const ModeField& m, const PhysicalConstants& k = constants());

namespace detail {

inline ModeField build_mode(const CavityGeometry& g, const GridSpec& grid, const Discretisation& d,
                            const EigenPair& pair, const PhysicalConstants& k) {
    const int nr = grid.nr, nz = grid.nz;
    const double dr = grid.dr, dz = grid.dz;
    const double two_pi = 2.0 * std::numbers::pi;
    ModeField m;
    m.geometry = g;
    m.grid = grid;
    m.vacuum = d.vacuum;
    m.eigen_residual = pair.residual;
    const double k2 = pair.value;  // omega^2 mu0 eps0
    const double omega = std::sqrt(k2) * k.c;
    m.f0 = omega / two_pi;

    m.h_phi.assign(static_cast<std::size_t>(nr) * nz, 0.0);
    auto hhat = [&](int i, int j) -> double {
        if (i < 0 || j < 0 || i >= nr || j >= nz) return 0.0;
        const int p = d.cell_dof[static_cast<std::size_t>(i) * nz + j];
        return p >= 0 ? pair.vector[p] : 0.0;
    };
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j) m.h_phi[static_cast<std::size_t>(i) * nz + j] = hhat(i, j) / (two_pi * (i + 0.5) * dr);

    // Ampere: circulation of h around the dual face = omega eps0 E A_dual (the i is dropped,
    // E is reported as the peak amplitude in quadrature with H).
    m.e_r.assign(static_cast<std::size_t>(nr) * (nz + 1), 0.0);
    m.e_z.assign(static_cast<std::size_t>(nr + 1) * nz, 0.0);
    auto vac = [&](int i, int j) { return i >= 0 && j >= 0 && i < nr && j < nz && d.vacuum[static_cast<std::size_t>(i) * nz + j]; };
    for (int i = 0; i < nr; ++i)
        for (int j = 1; j < nz; ++j)
            if (vac(i, j - 1) && vac(i, j)) {
                const double circ = hhat(i, j - 1) - hhat(i, j);
                m.e_r[static_cast<std::size_t>(i) * (nz + 1) + j] = circ / (omega * k.eps0 * two_pi * (i + 0.5) * dr * dz);
            }
    for (int j = 0; j < nz; ++j) {
        if (vac(0, j)) m.e_z[j] = hhat(0, j) / (omega * k.eps0 * std::numbers::pi * 0.25 * dr * dr);
        for (int i = 1; i < nr; ++i)
            if (vac(i - 1, j) && vac(i, j)) {
                const double circ = hhat(i, j) - hhat(i - 1, j);
                m.e_z[static_cast<std::size_t>(i) * nz + j] = circ / (omega * k.eps0 * two_pi * i * dr * dr);
            }
    }

    const double u = stored_energy(m, k);
    const double scale = 1.0 / std::sqrt(u);
    for (auto& x : m.h_phi) x *= scale;
    for (auto& x : m.e_r) x *= scale;
    for (auto& x : m.e_z) x *= scale;
    // Fix the overall sign so H is positive on average; keeps CSV output reproducible.
    double hsum = 0.0;
    for (double x : m.h_phi) hsum += x;
    if (hsum < 0) {
        for (auto& x : m.h_phi) x = -x;
        for (auto& x : m.e_r) x = -x;
        for (auto& x : m.e_z) x = -x;
    }
    m.stored_energy = stored_energy(m, k);
    return m;
}

}  // namespace detail

inline std::vector<ModeField> solve_modes(const CavityGeometry& g, const GridSpec& grid,
                                          const std::vector<AxisSphere>& obstacles, const ModeSolveOptions& opt,
                                          const PhysicalConstants& k) {
    if (auto errs = geometry_errors(g); !errs.empty()) detail::join_errors(errs, "solve_modes: invalid geometry");
    if (!(grid.dr > 0) || !(grid.dz > 0) || grid.nr * grid.dr < g.outer_radius * (1 - 1e-9) ||
        grid.nz * grid.dz < g.outer_height * (1 - 1e-9))
        throw ValidationError("solve_modes: grid does not cover the cavity");
    if (!g.is_pillbox() && g.stub_radius / grid.dr < 10.0 - 1e-9)
        throw ValidationError("solve_modes: grid too coarse, stub radius needs >= 10 radial cells");

    const auto d = detail::discretise(g, grid, obstacles);
    double target = opt.target_hz.value_or(
        g.is_pillbox() ? kBesselJ0Zero * k.c / (2.0 * std::numbers::pi * g.outer_radius) : analytic_coax_estimate(g, k));
    const int want = std::max(1, opt.modes);

    // Place the shift at 0.8 x the target, then lower it until the inertia count proves the
    // lowest `want` modes are all among the Ritz pairs returned.
    double sigma_hz = 0.8 * target;
    for (int attempt = 0; attempt < 8; ++attempt) {
        const double kk = 2.0 * std::numbers::pi * sigma_hz / k.c;
        LanczosOptions lo;
        lo.nev = want + 3;
        const auto res = shift_invert_eigs(d.a, d.m, kk * kk, lo);
        const double sig2 = kk * kk;
        const int found_below = static_cast<int>(std::count_if(res.pairs.begin(), res.pairs.end(), [&](const EigenPair& p) { return p.value < sig2; }));
        if (found_below == res.count_below_shift && static_cast<int>(res.pairs.size()) >= want) {
            std::vector<ModeField> out;
            for (int q = 0; q < want; ++q) {
                if (!(res.pairs[q].value > 0)) throw EigenSolveError("solve_modes: non-positive eigenvalue", res.pairs[q].residual);
                if (res.pairs[q].residual > opt.residual_limit)
                    throw EigenSolveError("solve_modes: eigen-residual above limit", res.pairs[q].residual);
                out.push_back(detail::build_mode(g, grid, d, res.pairs[q], k));
            }
            for (std::size_t q = 1; q < res.pairs.size(); ++q)
                out.front().higher_frequencies.push_back(std::sqrt(res.pairs[q].value) * k.c / (2.0 * std::numbers::pi));
            return out;
        }
        // Too many modes below the shift: move it down towards the lowest one.
        sigma_hz *= (res.count_below_shift > found_below) ? 0.5 : 1.25;
    }
    throw EigenSolveError("solve_modes: could not bracket the lowest modes", NAN);
}

/// Fundamental mode of the empty cavity.
inline ModeField solve_bare_mode(const CavityGeometry& g, const GridSpec& grid, const PhysicalConstants& k = constants()) {
    return solve_modes(g, grid, {}, {}, k).front();
}

/// Time-averaged stored energy (1/4) integral(eps0 |E|^2 + mu0 |H|^2) dV with peak-amplitude fields.
struct EnergySplit {
    double electric = 0.0;
    double magnetic = 0.0;
    [[nodiscard]] double total() const { return electric + magnetic; }
};

inline EnergySplit energy_split(const ModeField& m, const PhysicalConstants& k = constants()) {
    const int nr = m.grid.nr, nz = m.grid.nz;
    const double dr = m.grid.dr, dz = m.grid.dz;
    const double two_pi = 2.0 * std::numbers::pi;
    EnergySplit e;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j) {
            const double h = m.h(i, j);
            e.magnetic += 0.25 * k.mu0 * h * h * two_pi * (i + 0.5) * dr * dr * dz;
        }
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j <= nz; ++j) {
            const double v = m.er(i, j);
            e.electric += 0.25 * k.eps0 * v * v * two_pi * (i + 0.5) * dr * dr * dz;
        }
    for (int i = 0; i <= nr; ++i) {
        const double area = (i == 0) ? std::numbers::pi * 0.25 * dr * dr : two_pi * i * dr * dr;
        for (int j = 0; j < nz; ++j) {
            const double v = m.ez(i, j);
            e.electric += 0.25 * k.eps0 * v * v * area * dz;
        }
    }
    return e;
}

inline double stored_energy(const ModeField& m, const PhysicalConstants& k) { return energy_split(m, k).total(); }

/// Copy of the mode with every field multiplied by s.
inline ModeField scaled(const ModeField& m, double s, const PhysicalConstants& k = constants()) {
    ModeField out = m;
    for (auto& x : out.h_phi) x *= s;
    for (auto& x : out.e_r) x *= s;
    for (auto& x : out.e_z) x *= s;
    out.stored_energy = stored_energy(out, k);
    return out;
}

/// Tangential H on each wall face, extrapolated from the adjacent cell centre.
struct WallPatch {
    double h = 0.0;
    double area = 0.0;
};

inline std::vector<WallPatch> wall_patches(const ModeField& m) {
    const int nr = m.grid.nr, nz = m.grid.nz;
    const double dr = m.grid.dr, dz = m.grid.dz;
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<WallPatch> out;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nz; ++j) {
            if (!m.is_vacuum(i, j)) continue;
            const double rc = (i + 0.5) * dr;
            const double h = m.h(i, j);
            // r H is continuous across vertical walls; H itself across horizontal ones.
            if (i > 0 && !m.is_vacuum(i - 1, j)) out.push_back({h * rc / (i * dr), two_pi * i * dr * dz});
            if (!m.is_vacuum(i + 1, j)) out.push_back({h * rc / ((i + 1) * dr), two_pi * (i + 1) * dr * dz});
            if (!m.is_vacuum(i, j - 1)) out.push_back({h, two_pi * rc * dr});
            if (!m.is_vacuum(i, j + 1)) out.push_back({h, two_pi * rc * dr});
        }
    return out;
}

inline double max_wall_h(const ModeField& m) {
    double mx = 0.0;
    for (const auto& p : wall_patches(m)) mx = std::max(mx, std::abs(p.h));
    return mx;
}

/// G = omega mu0 integral |H|^2 dV / wall integral |H_t|^2 dA, so that Q_int = G / R_s.
inline double geometry_factor(const ModeField& m, const PhysicalConstants& k = constants()) {
    const double dr = m.grid.dr, dz = m.grid.dz;
    double vol = 0.0;
    for (int i = 0; i < m.grid.nr; ++i)
        for (int j = 0; j < m.grid.nz; ++j) {
            const double h = m.h(i, j);
            vol += h * h * 2.0 * std::numbers::pi * (i + 0.5) * dr * dr * dz;
        }
    double surf = 0.0;
    for (const auto& p : wall_patches(m)) surf += p.h * p.h * p.area;
    return 2.0 * std::numbers::pi * m.f0 * k.mu0 * vol / surf;
}

struct FieldSample {
    double e_r = 0.0;
    double e_z = 0.0;
    double h_phi = 0.0;
    [[nodiscard]] double e_abs() const { return std::hypot(e_r, e_z); }
    [[nodiscard]] double h_abs() const { return std::abs(h_phi); }
};

namespace detail {

// Bilinear interpolation on a lattice x = (i + ox) dx, y = (j + oy) dy, weights renormalised
// over the nodes for which `valid` holds.
template <class Value, class Valid>
double lattice_interp(double x, double y, double dx, double dy, double ox, double oy, int nx, int ny, Value value, Valid valid) {
    const double fx = x / dx - ox, fy = y / dy - oy;
    int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy));
    double sum = 0.0, wsum = 0.0;
    for (int di = 0; di <= 1; ++di)
        for (int dj = 0; dj <= 1; ++dj) {
            const int i = i0 + di, j = j0 + dj;
            if (i < 0 || j < 0 || i >= nx || j >= ny || !valid(i, j)) continue;
            const double wx = di ? fx - i0 : 1.0 - (fx - i0);
            const double wy = dj ? fy - j0 : 1.0 - (fy - j0);
            const double w = std::max(wx, 0.0) * std::max(wy, 0.0) + 1e-300;
            sum += w * value(i, j);
            wsum += w;
        }
    return wsum > 0 ? sum / wsum : 0.0;
}

}  // namespace detail

/// Field components at (r, z) in the vacuum region (walls included).
inline FieldSample field_at(const ModeField& m, double r, double z) {
    const auto& g = m.geometry;
    const double tol = 1e-12;
    if (r < -tol || z < -tol || r > g.outer_radius + tol || z > g.outer_height + tol)
        throw DomainError("field_at: point outside cavity");
    if (r < g.stub_radius - tol && z < g.stub_height - tol) throw DomainError("field_at: point inside stub metal");
    const int nr = m.grid.nr, nz = m.grid.nz;
    const double dr = m.grid.dr, dz = m.grid.dz;
    FieldSample s;
    s.e_r = detail::lattice_interp(r, z, dr, dz, 0.5, 0.0, nr, nz + 1, [&](int i, int j) { return m.er(i, j); },
                                   [&](int i, int j) { return m.is_vacuum(i, j - 1) || m.is_vacuum(i, j); });
    s.e_z = detail::lattice_interp(r, z, dr, dz, 0.0, 0.5, nr + 1, nz, [&](int i, int j) { return m.ez(i, j); },
                                   [&](int i, int j) { return m.is_vacuum(i - 1, j) || m.is_vacuum(i, j); });
    // H_phi is odd through the axis: mirror the first column as a ghost at r = -dr/2.
    s.h_phi = detail::lattice_interp(r + dr, z, dr, dz, 0.5, 0.5, nr + 1, nz,
                                     [&](int i, int j) { return i == 0 ? -m.h(0, j) : m.h(i - 1, j); },
                                     [&](int i, int j) { return i == 0 ? m.is_vacuum(0, j) : m.is_vacuum(i - 1, j); });
    return s;
}

/// Peak wall B for a steady drive. Stored energy U = 4 Q_l^2 P_in / (Q_ext omega0) with two
/// identical ports; the normalised (1 J) mode is scaled to that energy.
inline double rf_field_amplitude(const ModeField& m, double p_in, double q_loaded, double q_ext, double f0,
                                 const PhysicalConstants& k = constants()) {
    if (!(p_in >= 0) || !(q_loaded > 0) || !(q_ext > 0) || !(f0 > 0))
        throw DomainError("rf_field_amplitude: inputs must be positive");
    const double omega = 2.0 * std::numbers::pi * f0;
    const double u = 4.0 * q_loaded * q_loaded * p_in / (q_ext * omega);
    return k.mu0 * max_wall_h(m) * std::sqrt(u / m.stored_energy);
}

}  // namespace levicav
