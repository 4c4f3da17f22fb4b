#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "levicav/superconductor.hpp"

using namespace levicav;

TEST(TwoFluid, SuperfluidFractionValues) {
    EXPECT_DOUBLE_EQ(superfluid_fraction(0.0, 1.2), 1.0);
    EXPECT_NEAR(superfluid_fraction(0.6, 1.2), 0.9375, 1e-15);
    EXPECT_DOUBLE_EQ(superfluid_fraction(1.2, 1.2), 0.0);
    EXPECT_DOUBLE_EQ(superfluid_fraction(2.0, 1.2), 0.0);
    EXPECT_THROW(superfluid_fraction(-0.1, 1.2), DomainError);
    EXPECT_THROW(superfluid_fraction(0.1, 0.0), DomainError);
}

TEST(TwoFluid, PenetrationDepthNearTc) {
    MaterialParams m;
    const double expected = 1.0 / std::sqrt(1.0 - std::pow(0.99, 4));
    EXPECT_NEAR(penetration_depth(0.99 * m.t_c, m) / m.lambda0, expected, 1e-12 * expected);
    EXPECT_NEAR(expected, 5.038, 1e-3);
    EXPECT_DOUBLE_EQ(penetration_depth(0.0, m), m.lambda0);
    EXPECT_THROW(penetration_depth(m.t_c, m), DomainError);
}

TEST(TwoFluid, PenetrationDepthMonotoneAndDivergent) {
    MaterialParams m;
    double prev = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double l = penetration_depth(m.t_c * i / 1000.0, m);
        EXPECT_GE(l, prev);
        prev = l;
    }
    EXPECT_GT(penetration_depth(m.t_c * (1 - 1e-9), m), 1e3 * m.lambda0);
}

TEST(TwoFluid, LondonDepth) {
    const auto& k = constants();
    const double n = 1e28;
    EXPECT_NEAR(london_depth(n), std::sqrt(k.m_e / (k.mu0 * n * k.e_charge * k.e_charge)), 1e-20);
    EXPECT_THROW(london_depth(0.0), DomainError);
}

TEST(TwoFluid, CriticalFieldParabola) {
    MaterialParams m;
    EXPECT_DOUBLE_EQ(critical_field(0.0, m), m.b_c0);
    EXPECT_NEAR(critical_field(0.6, m), 0.75 * m.b_c0, 1e-18);
    EXPECT_DOUBLE_EQ(critical_field(m.t_c, m), 0.0);
}

TEST(TwoFluid, PairBreakingByRfField) {
    MaterialParams m;
    const double t = 0.3;
    const double bc = critical_field(t, m);
    EXPECT_DOUBLE_EQ(effective_pair_density(t, 0.0, m), superfluid_fraction(t, m.t_c));
    EXPECT_NEAR(effective_pair_density(t, 0.5 * bc, m), 0.75 * superfluid_fraction(t, m.t_c), 1e-15);
    EXPECT_DOUBLE_EQ(effective_pair_density(t, bc, m), 0.0);
    EXPECT_DOUBLE_EQ(effective_pair_density(t, 2 * bc, m), 0.0);
    EXPECT_THROW(effective_pair_density(t, -1.0, m), DomainError);
}

TEST(TwoFluid, FieldLoadingDepressesTc) {
    MaterialParams m;
    const auto w = field_loaded(m, 0.25 * m.b_c0);
    EXPECT_NEAR(w.t_c, m.t_c * std::sqrt(0.75), 1e-15);
    EXPECT_NEAR(w.b_c0, 0.75 * m.b_c0, 1e-18);
    // Headroom b_c(t) - b_static equals the loaded parabola at every temperature below the new t_c.
    for (double t : {0.0, 0.3, 0.7, 1.0})
        EXPECT_NEAR(critical_field(t, w), critical_field(t, m) - 0.25 * m.b_c0, 1e-15);
    EXPECT_THROW(field_loaded(m, m.b_c0), DomainError);
    EXPECT_THROW(field_loaded(m, -1e-3), DomainError);
}

TEST(SurfaceImpedance, NormalStateSkinEffect) {
    MaterialParams m;
    const double f = 10e9;
    const auto z = surface_impedance(m.t_c, f, 0.0, m);
    const double rn = std::sqrt(2 * std::numbers::pi * f * constants().mu0 / (2 * m.sigma_n));
    EXPECT_NEAR(z.r_s, rn, 1e-15);
    EXPECT_DOUBLE_EQ(z.x_s, z.r_s);
}

TEST(SurfaceImpedance, SuperconductingLimit) {
    MaterialParams m;
    const double f = 10e9;
    const double omega = 2 * std::numbers::pi * f;
    const auto z = surface_impedance(0.0, f, 0.0, m);
    // At t = 0 the normal fluid is absent: X_s = omega mu0 lambda0, R_s reduces to the residual.
    EXPECT_NEAR(z.x_s, omega * constants().mu0 * m.lambda0, 1e-9 * z.x_s);
    EXPECT_NEAR(z.r_s, m.r_res, 1e-15);
    const auto warm = surface_impedance(1.0, f, 0.0, m);
    EXPECT_GT(warm.r_s, z.r_s);
    EXPECT_GT(warm.x_s, z.x_s);
    EXPECT_LT(warm.r_s, normal_surface_resistance(f, m));
}

TEST(SurfaceImpedance, StateRecord) {
    MaterialParams m;
    const auto s = superconductor_state(0.5, 10e9, 0.0, m);
    EXPECT_TRUE(s.is_superconducting);
    EXPECT_NEAR(s.lambda, penetration_depth(0.5, m), 1e-18);
    const auto n = superconductor_state(1.3, 10e9, 0.0, m);
    EXPECT_FALSE(n.is_superconducting);
    EXPECT_TRUE(std::isinf(n.lambda));
}

TEST(Inductance, BudgetReproducesReference) {
    const auto b = make_budget(10e9, 50.0, 0.01);
    EXPECT_NEAR(resonant_frequency_lumped(b), 10e9, 1e-3);
    EXPECT_NEAR(b.l_kin / b.l_total(), 0.01, 1e-15);
    EXPECT_THROW(make_budget(10e9, 50.0, 1.0), DomainError);
}

TEST(Inductance, LongerPenetrationLowersFrequency) {
    const auto b = make_budget(10e9, 50.0, 0.01);
    InductanceBudget hot = b;
    hot.l_kin = kinetic_inductance(2.0 * 50e-9, b, 50e-9);
    EXPECT_DOUBLE_EQ(hot.l_kin, 2.0 * b.l_kin);
    EXPECT_NEAR(resonant_frequency_lumped(hot), 10e9 / std::sqrt(1.01), 1e-3);
    EXPECT_THROW(kinetic_inductance(0.0, b, 50e-9), DomainError);
}
