#pragma once

// Small dense control-design kernels: eigenvalues, Lyapunov and Riccati
// solvers, matrix exponential. Intended for n <= 8.

#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::numerics {

using Complex = std::complex<double>;

/// Eigenvalues sorted by (real, imag).
inline std::vector<Complex> eigenvalues(const Matrix& a) {
    require_square(a, "eigenvalues: A");
    require_finite(a, "eigenvalues: A");
    if (a.rows() == 0) return {};
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NoConvergence("eigenvalues: QR iteration did not converge");
    }
    const auto& ev = solver.eigenvalues();
    std::vector<Complex> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return out;
}

inline double spectral_abscissa(const Matrix& a) {
    double s = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues(a)) s = std::max(s, l.real());
    return s;
}

inline bool is_hurwitz(const Matrix& a) { return a.rows() == 0 || spectral_abscissa(a) < 0.0; }

namespace detail {

// Solves A^T P + P A = -Q by Kronecker vectorization, no preconditions checked.
inline Matrix lyapunov_kronecker(const Matrix& a, const Matrix& q) {
    const Index n = a.rows();
    const Matrix eye = Matrix::Identity(n, n);
    const Matrix at = a.transpose();
    // vec(A^T P) = (I (x) A^T) vec(P);  vec(P A) = (A^T (x) I) vec(P)
    Matrix kron(n * n, n * n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            kron.block(i * n, j * n, n, n) = eye(i, j) * at + at(i, j) * eye;
        }
    }
    const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
    const Vector p = kron.fullPivLu().solve(rhs);
    Matrix out = Eigen::Map<const Matrix>(p.data(), n, n);
    return 0.5 * (out + out.transpose());
}

}  // namespace detail

/// Solves A^T P + P A = -Q for Hurwitz A.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    require_square(a, "solve_lyapunov: A");
    require_shape(q, a.rows(), a.cols(), "solve_lyapunov: Q");
    require_finite(a, "solve_lyapunov: A");
    require_finite(q, "solve_lyapunov: Q");
    if (!is_hurwitz(a)) {
        throw NotHurwitz("solve_lyapunov: A has an eigenvalue with nonnegative real part");
    }
    return detail::lyapunov_kronecker(a, q);
}

inline Matrix care_residual(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                            const Matrix& p) {
    return a.transpose() * p + p * a - p * b * r.ldlt().solve(b.transpose() * p) + q;
}

struct CareSolution {
    Matrix P;
    Matrix K;
    int iterations = 0;
    double residual = 0.0;
};

/// Stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0 by
/// Newton-Kleinman iteration. K = R^-1 B^T P.
inline CareSolution solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                               double tolerance = 1e-10, int max_iterations = 100) {
    require_square(a, "solve_care: A");
    const Index n = a.rows();
    if (b.rows() != n) throw DimensionMismatch("solve_care: B rows must match A");
    const Index m = b.cols();
    require_shape(q, n, n, "solve_care: Q");
    require_shape(r, m, m, "solve_care: R");
    for (const Matrix* x : {&a, &b, &q, &r}) require_finite(*x, "solve_care: input");
    if (!is_positive_definite(r)) throw ValidationError("solve_care: R must be positive definite");

    const auto r_ldlt = r.ldlt();
    const Matrix eye = Matrix::Identity(n, n);

    // Stabilizing seed. Zero when A is already Hurwitz; otherwise Bass's
    // method: with beta > -Re(lambda) for every eigenvalue, A + beta I is
    // anti-stable, (A + beta I) Z + Z (A + beta I)^T = 2 B B^T has Z > 0 for a
    // controllable pair, and K0 = B^T Z^-1 gives (A - B K0) Z + Z (A - B K0)^T = -2 beta Z.
    Matrix k = Matrix::Zero(m, n);
    if (!is_hurwitz(a)) {
        double lowest = 0.0;
        for (const auto& l : eigenvalues(a)) lowest = std::min(lowest, l.real());
        const double beta = 1.0 - lowest;
        const Matrix shifted = -(a + beta * eye);
        // shifted is Hurwitz; solve shifted Z + Z shifted^T = -2 B B^T.
        const Matrix z = detail::lyapunov_kronecker(shifted.transpose(), 2.0 * b * b.transpose());
        Eigen::LLT<Matrix> z_llt(z);
        if (z_llt.info() != Eigen::Success || z.norm() < 1e-14) {
            throw NotStabilizable("solve_care: (A, B) has an uncontrollable unstable mode");
        }
        k = b.transpose() * z_llt.solve(eye);
        if (!is_hurwitz(a - b * k)) {
            throw NotStabilizable("solve_care: no stabilizing seed gain found");
        }
    }

    CareSolution sol;
    Matrix p = Matrix::Zero(n, n);
    for (int it = 1; it <= max_iterations; ++it) {
        const Matrix closed = a - b * k;
        if (!is_hurwitz(closed)) {
            throw NotStabilizable("solve_care: Newton iterate lost stability");
        }
        p = detail::lyapunov_kronecker(closed, q + k.transpose() * r * k);
        k = r_ldlt.solve(b.transpose() * p);
        sol.iterations = it;
        sol.residual = care_residual(a, b, q, r, p).norm();
        if (sol.residual <= tolerance) break;
    }
    if (sol.residual > 1e-8 * std::max(1.0, q.norm())) {
        throw NoConvergence("solve_care: residual " + std::to_string(sol.residual) +
                            " after " + std::to_string(sol.iterations) + " iterations");
    }
    if (!is_hurwitz(a - b * k)) {
        throw NotStabilizable("solve_care: converged solution is not stabilizing");
    }
    sol.P = p;
    sol.K = k;
    return sol;
}

/// e^{A t} by scaling and squaring of a truncated Taylor series.
inline Matrix matrix_exponential(const Matrix& a, double t = 1.0) {
    require_square(a, "matrix_exponential: A");
    require_finite(a, "matrix_exponential: A");
    const Index n = a.rows();
    Matrix x = a * t;
    const double norm = x.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (n > 0 && norm > 0.25) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
        x /= std::ldexp(1.0, squarings);
    }
    // ||x|| <= 1/4: 20 terms put the truncation error far below 1 ulp.
    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 20; ++k) {
        term = term * x / static_cast<double>(k);
        result += term;
    }
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

}  // namespace adaptive_pilot::numerics
