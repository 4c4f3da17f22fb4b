#pragma once

// Resonance observables: Q budget, two-port S21 synthesis and complex Lorentzian fitting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "levicav/mode_solver.hpp"
#include "levicav/perturbation.hpp"
#include "levicav/superconductor.hpp"
#include "levicav/units.hpp"

namespace levicav {

using cplx = std::complex<double>;

/// Two identical coupling ports share one q_ext; 1/q_loaded = 1/q_int + 2/q_ext.
struct ResonanceResult {
    double f0 = 0.0;
    double q_int = 0.0;
    double q_ext = 0.0;
    double q_loaded = 0.0;

    /// On-resonance transmission 2 q_loaded / q_ext.
    [[nodiscard]] double transmission() const { return 2.0 * q_loaded / q_ext; }
    [[nodiscard]] double linewidth() const { return f0 / q_loaded; }
};

inline double internal_q(double geometry_factor, double r_s) {
    if (!(geometry_factor > 0)) throw DomainError("internal_q: geometry factor must be > 0");
    if (r_s == 0.0) throw DomainError("lossless wall: Q undefined");
    if (!(r_s > 0)) throw DomainError("internal_q: surface resistance must be > 0");
    return geometry_factor / r_s;
}

inline double loaded_q(double q_int, double q_ext) {
    if (!(q_int > 0) || !(q_ext > 0)) throw DomainError("loaded_q: quality factors must be > 0");
    return 1.0 / (1.0 / q_int + 2.0 / q_ext);
}

inline ResonanceResult make_resonance(double f0, double q_int, double q_ext) {
    if (!(f0 > 0)) throw DomainError("make_resonance: f0 must be > 0");
    return {f0, q_int, q_ext, loaded_q(q_int, q_ext)};
}

/// Fraction of the incident power dissipated in the walls: 1 - |S11|^2 - |S21|^2 = 2x(1-x).
inline double dissipated_fraction(double transmission) { return 2.0 * transmission * (1.0 - transmission); }

struct TraceMeta {
    double power_dbm = 0.0;
    double temperature_k = 0.0;
    double timestamp_s = 0.0;
};

struct S21Trace {
    std::vector<double> freqs;
    std::vector<cplx> s21;
    TraceMeta meta;
};

/// Noiseless two-port transmission x / (1 + 2i Q_l (f - f0) / f0).
inline cplx s21_model(double f, double f0, double q_loaded, double x) {
    return x / cplx(1.0, 2.0 * q_loaded * (f - f0) / f0);
}

inline S21Trace synth_s21(const ResonanceResult& res, const std::vector<double>& freqs, double noise_sigma,
                          std::uint64_t seed, TraceMeta meta = {}) {
    for (std::size_t i = 1; i < freqs.size(); ++i)
        if (!(freqs[i] > freqs[i - 1])) throw DomainError("synth_s21: frequencies must be strictly increasing");
    S21Trace t;
    t.freqs = freqs;
    t.meta = meta;
    t.s21.reserve(freqs.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double x = res.transmission();
    for (double f : freqs) {
        cplx s = s21_model(f, res.f0, res.q_loaded, x);
        if (noise_sigma > 0) {
            const double re = gauss(rng), im = gauss(rng);
            s += noise_sigma * cplx(re, im);
        }
        t.s21.push_back(s);
    }
    return t;
}

/// Frequencies centred on f0 spanning `linewidths` loaded linewidths.
inline std::vector<double> sweep_around(const ResonanceResult& res, double linewidths = 10.0, int points = 801) {
    std::vector<double> f(static_cast<std::size_t>(points));
    const double span = linewidths * res.linewidth();
    for (int i = 0; i < points; ++i) f[static_cast<std::size_t>(i)] = res.f0 - 0.5 * span + span * i / (points - 1);
    return f;
}

struct FitGuess {
    double f0 = 0.0;
    double q_loaded = 0.0;
    double transmission = 0.0;
};

struct FitOptions {
    std::optional<FitGuess> initial_guess;
    bool background = false;      // complex a + b (f - f_center) added to the model
    bool magnitude_only = false;  // fit |S21| only
    int max_iterations = 200;
    double gradient_tol = 1e-10;
    double residual_ceiling = 0.05;
};

struct FitReport {
    double f0_hat = 0.0;
    double q_loaded_hat = 0.0;
    double q_ext_hat = 0.0;
    double transmission_hat = 0.0;
    double residual_rms = 0.0;
    double sigma_f0 = 0.0;
    double sigma_q_loaded = 0.0;
    double sigma_transmission = 0.0;
    int iterations = 0;
    bool converged = false;
    bool span_warning = false;  // trace covers fewer than 6 fitted linewidths
    cplx background_offset{0.0, 0.0};
    cplx background_slope{0.0, 0.0};  // per Hz
};

/// Starting point from the magnitude peak and its half-power width.
inline FitGuess guess_from_peak(const S21Trace& t) {
    const std::size_t n = t.freqs.size();
    std::size_t k = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(t.s21[i]) > std::abs(t.s21[k])) k = i;
    const double peak = std::abs(t.s21[k]);
    const double half = peak / std::sqrt(2.0);
    auto cross = [&](std::ptrdiff_t dir) {
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(k);
        while (i + dir >= 0 && i + dir < static_cast<std::ptrdiff_t>(n) && std::abs(t.s21[static_cast<std::size_t>(i)]) > half) i += dir;
        return t.freqs[static_cast<std::size_t>(i)];
    };
    const double width = std::max(cross(1) - cross(-1), t.freqs[1] - t.freqs[0]);
    return {t.freqs[k], t.freqs[k] / width, peak};
}

namespace detail {

// Parameters: [ (f0 - fc)/scale, ln Q_l, x, a_re, a_im, b_re, b_im ]; background slopes are per `scale`.
struct FitProblem {
    const S21Trace& t;
    double fc, scale;
    bool background, magnitude;
    int np() const { return background ? 7 : 3; }
    int nr() const { return static_cast<int>(t.freqs.size()) * (magnitude ? 1 : 2); }

    void eval(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
        const std::size_t n = t.freqs.size();
        const double f0 = fc + p[0] * scale, q = std::exp(p[1]), x = p[2];
        r.resize(nr());
        if (jac) jac->setZero(nr(), np());
        for (std::size_t i = 0; i < n; ++i) {
            const double f = t.freqs[i];
            const double u = 2.0 * q * (f - f0) / f0;
            const cplx den(1.0, u);
            cplx s = x / den;
            // dS/du = -i x / den^2
            const cplx ds_du = cplx(0.0, -1.0) * x / (den * den);
            const double du_dp0 = -2.0 * q * f / (f0 * f0) * scale;
            const double du_dp1 = u;
            cplx dsp[7] = {ds_du * du_dp0, ds_du * du_dp1, 1.0 / den, 0, 0, 0, 0};
            if (background) {
                const double d = (f - fc) / scale;
                s += cplx(p[3], p[4]) + cplx(p[5], p[6]) * d;
                dsp[3] = 1.0;
                dsp[4] = cplx(0, 1);
                dsp[5] = d;
                dsp[6] = cplx(0, d);
            }
            if (magnitude) {
                const double m = std::abs(s);
                r[static_cast<Eigen::Index>(i)] = m - std::abs(t.s21[i]);
                if (jac)
                    for (int k = 0; k < np(); ++k) (*jac)(static_cast<Eigen::Index>(i), k) = (std::conj(s) * dsp[k]).real() / std::max(m, 1e-300);
            } else {
                const cplx e = s - t.s21[i];
                r[static_cast<Eigen::Index>(2 * i)] = e.real();
                r[static_cast<Eigen::Index>(2 * i + 1)] = e.imag();
                if (jac)
                    for (int k = 0; k < np(); ++k) {
                        (*jac)(static_cast<Eigen::Index>(2 * i), k) = dsp[k].real();
                        (*jac)(static_cast<Eigen::Index>(2 * i + 1), k) = dsp[k].imag();
                    }
            }
        }
    }
};

}  // namespace detail

/// Levenberg-Marquardt fit of the two-port Lorentzian (plus optional linear background).
inline FitReport fit_resonance(const S21Trace& trace, const FitOptions& opt = {}) {
    const std::size_t n = trace.freqs.size();
    if (n < 32 || trace.s21.size() != n) throw DomainError("fit_resonance: trace needs >= 32 points of matching length");
    for (std::size_t i = 1; i < n; ++i)
        if (!(trace.freqs[i] > trace.freqs[i - 1])) throw DomainError("fit_resonance: frequencies must be strictly increasing");

    const FitGuess g0 = opt.initial_guess.value_or(guess_from_peak(trace));
    const double fc = 0.5 * (trace.freqs.front() + trace.freqs.back());
    const double scale = g0.f0 / g0.q_loaded;  // one linewidth
    detail::FitProblem prob{trace, fc, scale, opt.background, opt.magnitude_only};

    Eigen::VectorXd p = Eigen::VectorXd::Zero(prob.np());
    p[0] = (g0.f0 - fc) / scale;
    p[1] = std::log(g0.q_loaded);
    p[2] = g0.transmission;

    Eigen::VectorXd r, r_try;
    Eigen::MatrixXd jac;
    prob.eval(p, r, &jac);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    FitReport rep;
    bool done = false;
    int it = 0;
    for (; it < opt.max_iterations && !done; ++it) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.norm() <= opt.gradient_tol * std::max(1.0, jac.norm() * r.norm())) break;
        bool accepted = false;
        for (int inner = 0; inner < 30; ++inner) {
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
            const Eigen::VectorXd trial = p + step;
            prob.eval(trial, r_try, nullptr);
            const double c_try = r_try.squaredNorm();
            if (std::isfinite(c_try) && c_try <= cost) {
                const double rel = step.norm() / std::max(1.0, p.norm());
                const double drop = cost - c_try;
                p = trial;
                cost = c_try;
                prob.eval(p, r, &jac);
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                if (rel < 1e-15 || drop <= 1e-18 * std::max(cost, 1e-300)) done = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) break;  // no descent direction left: at the minimum to rounding
    }

    rep.iterations = it;
    rep.f0_hat = fc + p[0] * scale;
    rep.q_loaded_hat = std::exp(p[1]);
    rep.transmission_hat = p[2];
    rep.q_ext_hat = 2.0 * rep.q_loaded_hat / rep.transmission_hat;
    if (opt.background) {
        rep.background_offset = cplx(p[3], p[4]);
        rep.background_slope = cplx(p[5], p[6]) / scale;
    }
    rep.residual_rms = std::sqrt(cost / static_cast<double>(n));
    const int dof = std::max(prob.nr() - prob.np(), 1);
    const Eigen::MatrixXd cov = (jac.transpose() * jac).inverse() * (cost / dof);
    rep.sigma_f0 = std::sqrt(std::max(cov(0, 0), 0.0)) * scale;
    rep.sigma_q_loaded = std::sqrt(std::max(cov(1, 1), 0.0)) * rep.q_loaded_hat;
    rep.sigma_transmission = std::sqrt(std::max(cov(2, 2), 0.0));
    const double span = trace.freqs.back() - trace.freqs.front();
    rep.span_warning = span < 6.0 * rep.f0_hat / rep.q_loaded_hat;
    rep.converged = std::isfinite(rep.f0_hat) && rep.q_loaded_hat > 0 && rep.residual_rms <= opt.residual_ceiling &&
                    it < opt.max_iterations;
    return rep;
}

/// Everything observable_state needs, derived once from the mode solve and the config.
struct SystemCalibration {
    double f0_ref = 0.0;           // bare mode frequency
    double geometry_factor = 0.0;  // ohm
    double wall_h_per_sqrt_j = 0.0;  // peak wall H of the mode scaled to 1 J
    HeightCurve magnet_curve;      // on-axis shift versus magnet height
    MaterialParams material;       // intrinsic wall parameters
    double b_static = 0.0;         // magnet field at the wall
    double q_ext = 1e6;
    double kinetic_fraction = 1e-3;
    InductanceBudget budget;
    double lambda_ref = 0.0;  // effective penetration length at t = 0, no drive

    /// Material with the static field folded in.
    [[nodiscard]] MaterialParams wall() const { return field_loaded(material, b_static); }
};

/// Fills budget and lambda_ref from the other fields.
inline void finish_calibration(SystemCalibration& c, const PhysicalConstants& k = constants()) {
    validate_material(c.material);
    if (!(c.f0_ref > 0) || !(c.geometry_factor > 0) || !(c.wall_h_per_sqrt_j > 0) || !(c.q_ext > 0))
        throw ValidationError("calibration incomplete: mode quantities and q_ext must be > 0");
    if (c.magnet_curve.z.size() < 2) throw ValidationError("calibration incomplete: magnet shift curve missing");
    c.budget = make_budget(c.f0_ref, 50.0, c.kinetic_fraction);
    const double omega = 2.0 * std::numbers::pi * c.f0_ref;
    c.lambda_ref = surface_impedance(0.0, c.f0_ref, 0.0, c.wall(), k).x_s / (omega * k.mu0);
}

class BistableError : public std::runtime_error {
public:
    BistableError(double a, double b) : std::runtime_error("bistable operating point"), iterate_a(a), iterate_b(b) {}
    double iterate_a, iterate_b;  // last two pair-fraction iterates
};

struct OperatingPoint {
    ResonanceResult res;
    bool is_superconducting = false;
    double pair_fraction = 0.0;
    double b_rf = 0.0;  // peak wall field, T
    double r_s = 0.0;
    double x_s = 0.0;
    int iterations = 0;
};

namespace detail {

inline double input_watts(double p_dbm) { return p_dbm == -std::numeric_limits<double>::infinity() ? 0.0 : dbm_to_watts(p_dbm); }

// Observables for a given condensate fraction (the fixed-point map body).
inline OperatingPoint evaluate_point(double x, double p_w, double trapped_r, const MaterialParams& wall,
                                     const SystemCalibration& c, const PhysicalConstants& k) {
    const double omega = 2.0 * std::numbers::pi * c.f0_ref;
    OperatingPoint op;
    op.pair_fraction = x;
    op.is_superconducting = x > 0.0;
    if (op.is_superconducting) {
        const double lambda = wall.lambda0 / std::sqrt(x);
        const cplx sigma{wall.sigma_n * (1.0 - x), -1.0 / (omega * k.mu0 * lambda * lambda)};
        const cplx z = std::sqrt(cplx{0.0, omega * k.mu0} / sigma);
        op.r_s = z.real() + wall.r_res + trapped_r;
        op.x_s = z.imag();
    } else {
        op.r_s = op.x_s = normal_surface_resistance(c.f0_ref, wall, k);
    }
    const double q_int = internal_q(c.geometry_factor, op.r_s);
    const double ql = loaded_q(q_int, c.q_ext);
    const double u = 4.0 * ql * ql * p_w / (c.q_ext * omega);
    op.b_rf = k.mu0 * c.wall_h_per_sqrt_j * std::sqrt(u);

    InductanceBudget b = c.budget;
    b.l_kin = kinetic_inductance(op.x_s / (omega * k.mu0), c.budget, c.lambda_ref);
    const double f_lumped = resonant_frequency_lumped(b);
    op.res.f0 = f_lumped;
    op.res.q_int = q_int;
    op.res.q_ext = c.q_ext;
    op.res.q_loaded = ql;
    return op;
}

}  // namespace detail

/// Self-consistent resonance at wall temperature t and drive p_in. The condensate fraction,
/// the surface impedance and the stored-field amplitude depend on each other; the loop is a
/// damped (0.5) fixed-point iteration on the condensate fraction.
inline OperatingPoint observable_state(double t, double p_in_dbm, double magnet_z, const SystemCalibration& c,
                                       double trapped_r = 0.0, const PhysicalConstants& k = constants()) {
    if (!(t >= 0)) throw DomainError("observable_state: temperature must be >= 0");
    if (!(trapped_r >= 0)) throw DomainError("observable_state: trapped resistance must be >= 0");
    if (!(c.lambda_ref > 0)) throw ValidationError("observable_state: calibration not finished");
    if (!(magnet_z >= c.magnet_curve.z.front() && magnet_z <= c.magnet_curve.z.back()))
        throw DomainError("observable_state: magnet height outside the calibrated curve");
    const double p_w = detail::input_watts(p_in_dbm);
    const MaterialParams wall = c.wall();

    double x = effective_pair_density(t, 0.0, wall);
    double prev = x;
    OperatingPoint op;
    bool converged = false;
    int it = 0;
    for (; it < 100; ++it) {
        op = detail::evaluate_point(x, p_w, trapped_r, wall, c, k);
        const double xn = effective_pair_density(t, op.b_rf, wall);
        if (std::abs(xn - x) <= 1e-12 + 1e-9 * std::abs(x)) {
            x = xn;
            converged = true;
            break;
        }
        prev = x;
        x = 0.5 * x + 0.5 * xn;
    }
    if (!converged) throw BistableError(prev, x);
    op = detail::evaluate_point(x, p_w, trapped_r, wall, c, k);
    op.iterations = it + 1;
    op.res.f0 += c.magnet_curve.at(magnet_z);
    return op;
}

/// Collapsed (normal-branch) observables, used when the fixed point does not settle.
inline OperatingPoint normal_branch(double p_in_dbm, double magnet_z, const SystemCalibration& c, double trapped_r = 0.0,
                                    const PhysicalConstants& k = constants()) {
    OperatingPoint op = detail::evaluate_point(0.0, detail::input_watts(p_in_dbm), trapped_r, c.wall(), c, k);
    op.res.f0 += c.magnet_curve.at(magnet_z);
    return op;
}

}  // namespace levicav
