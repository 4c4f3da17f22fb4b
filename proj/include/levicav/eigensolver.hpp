#pragma once

// Shift-invert Lanczos for the symmetric definite pencil (A, M), M diagonal.
//
// The operator (A - sigma M)^{-1} M is self-adjoint in the M inner product, so a plain
// Lanczos recurrence with full reorthogonalisation in that inner product converges to the
// eigenvalues nearest sigma. The LDL^T factor also yields the inertia of A - sigma M, i.e.
// the exact number of eigenvalues below sigma, which the caller uses to certify that no
// lower mode was skipped.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace levicav {

class EigenSolveError : public std::runtime_error {
public:
    EigenSolveError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;  // M-normalised
    double residual = 0.0;   // ||A x - value M x|| / ||value M x||
};

struct LanczosOptions {
    int nev = 4;
    int krylov_dim = 60;
    int max_restarts = 30;
    double tol = 1e-11;
    unsigned seed = 12345u;
};

struct ShiftInvertResult {
    std::vector<EigenPair> pairs;  // ascending by value
    int count_below_shift = 0;     // inertia of A - sigma M
};

inline ShiftInvertResult shift_invert_eigs(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& m_diag,
                                           double sigma, const LanczosOptions& opt = {}) {
    const Eigen::Index n = a.rows();
    if (n == 0 || a.cols() != n || m_diag.size() != n) throw std::invalid_argument("shift_invert_eigs: bad sizes");
    const int nev = static_cast<int>(std::min<Eigen::Index>(opt.nev, n));
    const int kdim = static_cast<int>(std::min<Eigen::Index>(std::max(opt.krylov_dim, 2 * nev + 10), n));

    Eigen::SparseMatrix<double> shifted = a;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma * m_diag[i];
    shifted.makeCompressed();

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw EigenSolveError("shift_invert_eigs: factorisation failed", NAN);

    ShiftInvertResult out;
    out.count_below_shift = static_cast<int>((ldlt.vectorD().array() < 0.0).count());

    auto m_dot = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) { return (x.array() * m_diag.array() * y.array()).sum(); };
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return ldlt.solve((m_diag.array() * x.array()).matrix()); };

    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd start(n);
    for (Eigen::Index i = 0; i < n; ++i) start[i] = 1.0 + 0.1 * uni(rng);

    Eigen::MatrixXd v(n, kdim + 1);
    Eigen::VectorXd ritz_theta;
    Eigen::MatrixXd ritz_vecs;
    double worst = INFINITY;

    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        v.col(0) = start / std::sqrt(m_dot(start, start));
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(kdim);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(kdim);
        int steps = kdim;
        for (int j = 0; j < kdim; ++j) {
            Eigen::VectorXd w = apply(v.col(j));
            alpha[j] = m_dot(v.col(j), w);
            // Two passes of classical Gram-Schmidt in the M inner product.
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd mw = (m_diag.array() * w.array()).matrix();
                const Eigen::VectorXd coeff = v.leftCols(j + 1).transpose() * mw;
                w -= v.leftCols(j + 1) * coeff;
            }
            beta[j] = std::sqrt(std::max(m_dot(w, w), 0.0));
            if (beta[j] < 1e-14 * std::abs(alpha[j])) {
                steps = j + 1;
                break;
            }
            v.col(j + 1) = w / beta[j];
        }

        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
        for (int j = 0; j < steps; ++j) {
            t(j, j) = alpha[j];
            if (j + 1 < steps) t(j, j + 1) = t(j + 1, j) = beta[j];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(t);
        // Largest |theta| <=> eigenvalues nearest sigma.
        std::vector<int> order(steps);
        for (int j = 0; j < steps; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](int x, int y) { return std::abs(tes.eigenvalues()[x]) > std::abs(tes.eigenvalues()[y]); });
        const int take = std::min(nev, steps);
        ritz_theta.resize(take);
        ritz_vecs.resize(n, take);
        worst = 0.0;
        for (int q = 0; q < take; ++q) {
            const int idx = order[q];
            ritz_theta[q] = tes.eigenvalues()[idx];
            ritz_vecs.col(q) = v.leftCols(steps) * tes.eigenvectors().col(idx);
            const double est = std::abs(beta[steps - 1] * tes.eigenvectors()(steps - 1, idx)) / std::abs(ritz_theta[q]);
            worst = std::max(worst, est);
        }
        if (worst < opt.tol || steps < kdim) break;
        start = ritz_vecs.rowwise().sum();
    }
    if (!(worst < 1e-6)) throw EigenSolveError("shift_invert_eigs: Lanczos did not converge", worst);

    for (int q = 0; q < ritz_theta.size(); ++q) {
        EigenPair p;
        Eigen::VectorXd x = ritz_vecs.col(q);
        // One inverse-iteration polish followed by a Rayleigh quotient.
        x = apply(x);
        x /= std::sqrt(m_dot(x, x));
        const Eigen::VectorXd ax = a * x;
        p.value = x.dot(ax);
        const Eigen::VectorXd mx = (m_diag.array() * x.array()).matrix();
        p.residual = (ax - p.value * mx).norm() / std::abs(p.value * mx.norm());
        p.vector = std::move(x);
        out.pairs.push_back(std::move(p));
    }
    std::sort(out.pairs.begin(), out.pairs.end(), [](const EigenPair& x, const EigenPair& y) { return x.value < y.value; });
    return out;
}

}  // namespace levicav
