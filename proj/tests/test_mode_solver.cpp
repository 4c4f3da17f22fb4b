#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "levicav/mode_solver.hpp"

using namespace levicav;

namespace {

CavityGeometry pillbox(double r, double h) {
    CavityGeometry g;
    g.outer_radius = r;
    g.outer_height = h;
    g.stub_height = 0.0;
    g.stub_radius = 0.0;
    return g;
}

double tm010(double r) { return kBesselJ0Zero * constants().c / (2 * std::numbers::pi * r); }

}  // namespace

TEST(ModeSolver, PillboxFrequencyAndNormalisation) {
    const auto g = pillbox(7e-3, 10e-3);
    const auto m = solve_bare_mode(g, make_grid(g, 1e-4, 1e-4));
    EXPECT_NEAR(m.f0 / tm010(7e-3), 1.0, 2e-3);
    EXPECT_NEAR(m.stored_energy, 1.0, 1e-12);
    EXPECT_LT(m.eigen_residual, 1e-8);
    const auto e = energy_split(m);
    EXPECT_NEAR(e.electric / e.magnetic, 1.0, 1e-2);
}

TEST(ModeSolver, PillboxFrequencyIndependentOfHeight) {
    const auto a = pillbox(7e-3, 6e-3), b = pillbox(7e-3, 12e-3);
    const double fa = solve_bare_mode(a, make_grid(a, 1e-4, 1e-4)).f0;
    const double fb = solve_bare_mode(b, make_grid(b, 1e-4, 1e-4)).f0;
    EXPECT_NEAR(fa / fb, 1.0, 1e-9);
}

TEST(ModeSolver, PillboxGeometryFactor) {
    const double a = 7e-3, d = 10e-3;
    const auto g = pillbox(a, d);
    const auto m = solve_bare_mode(g, make_grid(g, 1e-4, 1e-4));
    const double expected = constants().z0() * kBesselJ0Zero / (2.0 * (1.0 + a / d));
    EXPECT_NEAR(geometry_factor(m) / expected, 1.0, 0.02);
}

TEST(ModeSolver, PillboxFieldShape) {
    const auto g = pillbox(7e-3, 10e-3);
    const auto m = solve_bare_mode(g, make_grid(g, 1e-4, 1e-4));
    // E_z follows J0(2.405 r/R), H_phi vanishes on the axis.
    auto j0 = [](double x) { return std::cyl_bessel_j(0.0, x); };
    const double e0 = field_at(m, 0.0, 5e-3).e_z;
    for (double r : {1e-3, 3e-3, 5e-3})
        EXPECT_NEAR(field_at(m, r, 5e-3).e_z / e0, j0(kBesselJ0Zero * r / 7e-3), 0.01);
    EXPECT_NEAR(field_at(m, 0.0, 5e-3).h_phi, 0.0, 1e-9 * std::abs(field_at(m, 3e-3, 5e-3).h_phi));
}

TEST(ModeSolver, CoaxialFundamental) {
    const auto& m = fixtures::default_mode();
    const double est = analytic_coax_estimate(m.geometry);
    EXPECT_NEAR(m.f0 / est, 1.0, 0.15);
    EXPECT_LT(m.f0, analytic_coax_estimate(m.geometry, constants(), false));
    ASSERT_FALSE(m.higher_frequencies.empty());
    EXPECT_GT(m.higher_frequencies.front(), m.f0);
    EXPECT_NEAR(m.stored_energy, 1.0, 1e-12);
}

TEST(ModeSolver, CoaxialFieldConcentratesAtStubTop) {
    const auto& m = fixtures::default_mode();
    const auto& g = m.geometry;
    // The electric field peaks at the open end of the stub and decays upward.
    double prev = field_at(m, 0.0, g.stub_height + 0.2e-3).e_abs();
    const double e_top = prev;
    for (double dz : {1e-3, 2e-3, 3e-3, 5e-3}) {
        const double e = field_at(m, 0.0, g.stub_height + dz).e_abs();
        EXPECT_LT(e, prev);
        prev = e;
    }
    EXPECT_GT(e_top, 3 * prev);
    // Magnetic field is largest near the shorted floor.
    EXPECT_GT(field_at(m, g.stub_radius + 0.5e-3, 0.2e-3).h_abs(), field_at(m, g.stub_radius + 0.5e-3, g.stub_height - 0.2e-3).h_abs());
}

TEST(ModeSolver, EvanescentDecay) {
    const CavityGeometry g;
    const double f = 10e9;
    const double kc = kBesselJ0Zero / g.outer_radius;
    const double k0 = 2 * std::numbers::pi * f / constants().c;
    EXPECT_NEAR(evanescent_beta(f, g), std::sqrt(kc * kc - k0 * k0), 1e-9);
    EXPECT_LT(evanescent_beta(f, g, constants(), BetaMode::TE11), evanescent_beta(f, g));
    EXPECT_THROW(evanescent_beta(30e9, g), DomainError);
    EXPECT_DOUBLE_EQ(evanescent_model(f, g).z_ref, g.stub_height);
}

TEST(ModeSolver, RejectsBadGrids) {
    const CavityGeometry g;
    EXPECT_THROW(solve_bare_mode(g, make_grid(g, 4e-4, 1e-4)), ValidationError);
    GridSpec small = make_grid(g, 1e-4, 1e-4);
    small.nr -= 5;
    EXPECT_THROW(solve_bare_mode(g, small), ValidationError);
    CavityGeometry bad = g;
    bad.stub_radius = 8e-3;
    EXPECT_THROW(solve_bare_mode(bad, make_grid(g, 1e-4, 1e-4)), ValidationError);
}

TEST(ModeSolver, FieldAtRejectsMetal) {
    const auto& m = fixtures::default_mode();
    EXPECT_THROW(field_at(m, 1e-3, 1e-3), DomainError);
    EXPECT_THROW(field_at(m, 8e-3, 1e-3), DomainError);
    EXPECT_NO_THROW(field_at(m, 3e-3, 1e-3));
}

TEST(ModeSolver, ScalingAndDriveAmplitude) {
    const auto& m = fixtures::default_mode();
    const auto m2 = scaled(m, 2.0);
    EXPECT_NEAR(m2.stored_energy, 4.0, 1e-12);
    EXPECT_NEAR(max_wall_h(m2), 2 * max_wall_h(m), 1e-9 * max_wall_h(m));
    const double b1 = rf_field_amplitude(m, 1e-3, 5e3, 1e4, m.f0);
    const double b4 = rf_field_amplitude(m, 4e-3, 5e3, 1e4, m.f0);
    EXPECT_NEAR(b4 / b1, 2.0, 1e-12);
    EXPECT_NEAR(rf_field_amplitude(m2, 1e-3, 5e3, 1e4, m.f0), b1, 1e-12 * b1);
    EXPECT_THROW(rf_field_amplitude(m, -1.0, 5e3, 1e4, m.f0), DomainError);
}

TEST(ModeSolver, ObstacleOnAxisLowersFrequency) {
    // A metal sphere on axis just above the stub sits in strong E and pulls the frequency down.
    const CavityGeometry g;
    const auto grid = make_grid(g, 1e-4, 1e-4);
    const double f_bare = fixtures::default_mode().f0;
    const auto with = solve_modes(g, grid, {AxisSphere{g.stub_height + 1.0e-3, 0.5e-3}}).front();
    EXPECT_LT(with.f0, f_bare);
}
