#pragma once

// Offline gain design shared by the inner loop and the pilot model.

#include "adaptive_pilot/numerics/linalg.hpp"

namespace adaptive_pilot::adaptive {

namespace detail {

// -(C^T A^-1 B)^-1 with a relative singularity test on C^T A^-1 B.
inline Matrix dc_inverse_gain(const Matrix& a, const Matrix& b, const Matrix& c, const char* who) {
    numerics::require_square(a, who);
    if (b.rows() != a.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
        throw DimensionMismatch(std::string(who) + ": inconsistent A, B, C shapes");
    }
    auto a_lu = a.fullPivLu();
    if (!a_lu.isInvertible()) throw SingularDCGain(std::string(who) + ": A is singular");
    const Matrix ainv_b = a_lu.solve(b);
    const Matrix dc = c.transpose() * ainv_b;
    const double scale = c.norm() * ainv_b.norm();
    Eigen::JacobiSVD<Matrix> svd(dc);
    const double smallest = svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
    if (scale == 0.0 || smallest <= 1e-10 * scale) {
        throw SingularDCGain(std::string(who) + ": DC gain C^T A^-1 B is singular");
    }
    return -dc.inverse();
}

}  // namespace detail

/// Inner feed-forward gain: unit DC map from y_h to y_1 = C_1^T x through
/// x' = A_r x + B_p L_r y_h.
inline Matrix compute_Lr(const Matrix& a_r, const Matrix& b_p, const Matrix& c_1) {
    return detail::dc_inverse_gain(a_r, b_p, c_1, "compute_Lr");
}

/// Pilot feed-forward gain: unit DC map from r to y_2 through the crossover model.
inline Matrix compute_theta_r(const Matrix& a_m, const Matrix& b_r, const Matrix& c_2) {
    return detail::dc_inverse_gain(a_m, b_r, c_2, "compute_theta_r");
}

struct MatchingSolution {
    Matrix K_x_star;
    double residual = 0.0;
};

/// Least-squares K*_x with B_p Lambda K*_x = A_p - A_r. Residual is reported, never thrown.
inline MatchingSolution solve_matching(const Matrix& a_p, const Matrix& a_r, const Matrix& b_p,
                                       const Matrix& lambda) {
    numerics::require_shape(a_r, a_p.rows(), a_p.cols(), "solve_matching: A_r");
    if (b_p.rows() != a_p.rows()) throw DimensionMismatch("solve_matching: B_p rows");
    numerics::require_shape(lambda, b_p.cols(), b_p.cols(), "solve_matching: Lambda");
    const Matrix bl = b_p * lambda;
    const Matrix diff = a_p - a_r;
    MatchingSolution s;
    s.K_x_star = bl.completeOrthogonalDecomposition().solve(diff);
    s.residual = (diff - bl * s.K_x_star).norm();
    return s;
}

struct CrossoverDesign {
    Matrix theta_x;
    Matrix A_m;
};

/// LQR state gain theta_x for (A_r, B_p L_r) and the crossover matrix A_m = A_r - B_p L_r theta_x.
inline CrossoverDesign design_crossover(const Matrix& a_r, const Matrix& b_p, const Matrix& l_r,
                                        const Matrix& q_lqr, const Matrix& r_lqr) {
    const Matrix b_r = b_p * l_r;
    auto care = numerics::solve_care(a_r, b_r, q_lqr, r_lqr);
    return {care.K, a_r - b_r * care.K};
}

/// Every design-time matrix the two loops need.
struct GainSet {
    Matrix L_x;
    Matrix L_r;
    Matrix theta_x;
    Matrix theta_r;
    Matrix A_r;
    Matrix A_m;
    Matrix B_r;
    Matrix B_m;
    Matrix P_1;
    Matrix P_2;
};

}  // namespace adaptive_pilot::adaptive
