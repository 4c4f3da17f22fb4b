#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "levicav/eigensolver.hpp"

using namespace levicav;

namespace {

Eigen::SparseMatrix<double> laplacian_1d(int n) {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        t.emplace_back(i, i, 2.0);
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, -1.0);
            t.emplace_back(i + 1, i, -1.0);
        }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

}  // namespace

TEST(ShiftInvert, LaplacianLowestModes) {
    const int n = 400;
    const auto a = laplacian_1d(n);
    const Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
    auto exact = [&](int k) { return 2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1)); };
    const auto r = shift_invert_eigs(a, m, 0.5 * exact(1));
    ASSERT_GE(r.pairs.size(), 4u);
    EXPECT_EQ(r.count_below_shift, 0);
    for (int k = 1; k <= 4; ++k) {
        EXPECT_NEAR(r.pairs[k - 1].value, exact(k), 1e-10 * exact(k));
        EXPECT_LT(r.pairs[k - 1].residual, 1e-8);
    }
}

TEST(ShiftInvert, InertiaCountsModesBelowShift) {
    const int n = 200;
    const auto a = laplacian_1d(n);
    const Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
    auto exact = [&](int k) { return 2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1)); };
    const double sigma = 0.5 * (exact(3) + exact(4));
    const auto r = shift_invert_eigs(a, m, sigma);
    EXPECT_EQ(r.count_below_shift, 3);
    // The pairs nearest the shift are returned, in ascending order.
    for (std::size_t i = 1; i < r.pairs.size(); ++i) EXPECT_LT(r.pairs[i - 1].value, r.pairs[i].value);
    bool has4 = false;
    for (const auto& p : r.pairs) has4 |= std::abs(p.value - exact(4)) < 1e-9;
    EXPECT_TRUE(has4);
}

TEST(ShiftInvert, GeneralisedPencilMatchesDense) {
    const int n = 120;
    const auto a = laplacian_1d(n);
    Eigen::VectorXd m(n);
    for (int i = 0; i < n; ++i) m[i] = 1.0 + 0.5 * std::sin(0.1 * i) * std::sin(0.1 * i);
    const auto r = shift_invert_eigs(a, m, 0.0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> dense(Eigen::MatrixXd(a), Eigen::MatrixXd(m.asDiagonal()));
    for (std::size_t k = 0; k < r.pairs.size(); ++k) EXPECT_NEAR(r.pairs[k].value, dense.eigenvalues()[k], 1e-10);
    // Eigenvectors are M-normalised.
    const auto& x = r.pairs[0].vector;
    EXPECT_NEAR((x.array() * m.array() * x.array()).sum(), 1.0, 1e-10);
}

TEST(ShiftInvert, RejectsMismatchedSizes) {
    const auto a = laplacian_1d(10);
    EXPECT_THROW(shift_invert_eigs(a, Eigen::VectorXd::Ones(9), 0.0), std::invalid_argument);
}

TEST(ShiftInvert, DeterministicForFixedSeed) {
    const auto a = laplacian_1d(300);
    const Eigen::VectorXd m = Eigen::VectorXd::Ones(300);
    const auto r1 = shift_invert_eigs(a, m, 1e-4);
    const auto r2 = shift_invert_eigs(a, m, 1e-4);
    ASSERT_EQ(r1.pairs.size(), r2.pairs.size());
    for (std::size_t i = 0; i < r1.pairs.size(); ++i) EXPECT_EQ(r1.pairs[i].value, r2.pairs[i].value);
}
