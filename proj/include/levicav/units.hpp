#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace levicav {

/// Thrown when a numeric argument lies outside an operation's domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a parameter record violates one of its invariants.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// CODATA SI values. One shared immutable instance, see constants().
struct PhysicalConstants {
    double c = 299792458.0;
    double mu0 = 1.25663706212e-6;
    double eps0 = 8.8541878128e-12;
    double m_e = 9.1093837015e-31;
    double e_charge = 1.602176634e-19;

    [[nodiscard]] double z0() const { return std::sqrt(mu0 / eps0); }
};

inline const PhysicalConstants& constants() {
    static const PhysicalConstants k{};
    return k;
}

inline double dbm_to_watts(double p_dbm) {
    if (!std::isfinite(p_dbm)) throw DomainError("dbm_to_watts: non-finite power");
    return 1e-3 * std::pow(10.0, p_dbm / 10.0);
}

inline double watts_to_dbm(double p_w) {
    if (!(p_w > 0.0) || !std::isfinite(p_w)) throw DomainError("watts_to_dbm: power must be positive");
    return 10.0 * std::log10(p_w / 1e-3);
}

/// Coaxial quarter-wave cavity: an outer cylinder with a centre stub rising from the floor.
struct CavityGeometry {
    double outer_radius = 7.0e-3;
    double outer_height = 55.0e-3;
    double stub_height = 5.0e-3;
    double stub_radius = 2.0e-3;

    /// A plain closed cylinder (no stub).
    [[nodiscard]] bool is_pillbox() const { return stub_height == 0.0 || stub_radius == 0.0; }
};

enum class ConductorModel { PerfectConductor };

struct MagnetSpec {
    double radius = 0.5e-3;
    double remanence = 1.47;  // metadata only
    ConductorModel conductor_model = ConductorModel::PerfectConductor;
};

struct MaterialParams {
    double t_c = 1.2;
    double lambda0 = 50e-9;
    double sigma_n = 2.0e7;
    double b_c0 = 10e-3;
    double r_res = 2e-9;
};

struct ValidatedSystem {
    CavityGeometry geometry;
    MagnetSpec magnet;
};

namespace detail {
inline void join_errors(const std::vector<std::string>& errs, const char* what) {
    if (errs.empty()) return;
    std::string msg = what;
    for (const auto& e : errs) msg += "; " + e;
    throw ValidationError(msg);
}
}  // namespace detail

/// Every invariant of the cavity alone. A zero-size stub is allowed (pillbox).
inline std::vector<std::string> geometry_errors(const CavityGeometry& g) {
    std::vector<std::string> errs;
    if (!(g.outer_radius > 0)) errs.emplace_back("outer_radius must be > 0");
    if (!(g.outer_height > 0)) errs.emplace_back("outer_height must be > 0");
    if (g.stub_radius < 0) errs.emplace_back("stub_radius must be >= 0");
    if (g.stub_height < 0) errs.emplace_back("stub_height must be >= 0");
    if (g.stub_radius >= g.outer_radius) errs.emplace_back("stub exceeds outer radius");
    if (g.stub_height >= g.outer_height) errs.emplace_back("stub exceeds outer height");
    return errs;
}

inline ValidatedSystem validate_geometry(const CavityGeometry& g, const MagnetSpec& m) {
    auto errs = geometry_errors(g);
    if (!(g.stub_radius > 0)) errs.emplace_back("stub_radius must be > 0");
    if (!(g.stub_height > 0)) errs.emplace_back("stub_height must be > 0");
    if (!(m.radius > 0)) errs.emplace_back("magnet radius must be > 0");
    else if (m.radius >= g.stub_radius) errs.emplace_back("magnet exceeds stub radius");
    detail::join_errors(errs, "invalid system");
    return {g, m};
}

inline void validate_material(const MaterialParams& mat) {
    std::vector<std::string> errs;
    if (!(mat.t_c > 0)) errs.emplace_back("t_c must be > 0");
    if (mat.t_c > 10.0) errs.emplace_back("t_c exceeds 10 K sanity bound");
    if (!(mat.lambda0 > 0)) errs.emplace_back("lambda0 must be > 0");
    if (!(mat.sigma_n > 0)) errs.emplace_back("sigma_n must be > 0");
    if (!(mat.b_c0 > 0)) errs.emplace_back("b_c0 must be > 0");
    if (!(mat.r_res > 0)) errs.emplace_back("r_res must be > 0");
    detail::join_errors(errs, "invalid material");
}

}  // namespace levicav
