#pragma once

// Uncertain plant, reference model and the inner adaptive controller.

#include "adaptive_pilot/adaptive/design.hpp"
#include "adaptive_pilot/adaptive/projection.hpp"
#include "adaptive_pilot/adaptive/rate.hpp"

namespace adaptive_pilot::inner {

using adaptive::GainSet;
using adaptive::LearningRate;
using adaptive::ProjectionBounds;

/// True plant x' = A_p x + B_p Lambda u with outputs y_1 = C_1^T x, y_2 = C_2^T x.
struct PlantParams {
    Matrix A_p;
    Matrix B_p;
    Vector Lambda;  ///< diagonal of the control effectiveness, entries in (0, 1]
    Matrix C_1;
    Matrix C_2;

    Index n() const noexcept { return A_p.rows(); }
    Index m() const noexcept { return B_p.cols(); }

    void validate() const {
        numerics::require_square(A_p, "plant: A_p");
        const Index np = n();
        numerics::require_shape(B_p, np, B_p.cols(), "plant: B_p");
        numerics::require_size(Lambda, m(), "plant: Lambda");
        numerics::require_shape(C_1, np, m(), "plant: C_1");
        numerics::require_shape(C_2, np, m(), "plant: C_2");
        for (const Matrix* x : {&A_p, &B_p, &C_1, &C_2}) numerics::require_finite(*x, "plant");
        if (!((Lambda.array() > 0.0).all() && (Lambda.array() <= 1.0).all())) {
            throw ValidationError("plant: Lambda diagonal entries must lie in (0, 1]");
        }
        // Controllability: rank [B, AB, ..., A^{n-1}B] = n.
        Matrix ctrb(np, np * m());
        Matrix block = B_p;
        for (Index k = 0; k < np; ++k) {
            ctrb.middleCols(k * m(), m()) = block;
            block = A_p * block;
        }
        Eigen::FullPivLU<Matrix> lu(ctrb);
        lu.setThreshold(1e-12);
        if (lu.rank() < np) throw ValidationError("plant: (A_p, B_p) is not controllable");
    }
};

struct InnerLoopState {
    Vector x_p;
    Vector x_r;
    Matrix K_hat_x;     ///< m x n_p
    Vector lambda_hat;  ///< m

    static InnerLoopState initial(Index n, Index m, double lambda0 = 1.0) {
        return {Vector::Zero(n), Vector::Zero(n), Matrix::Zero(m, n), Vector::Constant(m, lambda0)};
    }
};

inline Vector output_y1(const Vector& x_p, const PlantParams& p) { return p.C_1.transpose() * x_p; }
inline Vector output_y2(const Vector& x_p, const PlantParams& p) { return p.C_2.transpose() * x_p; }

/// A_p x_p + B_p Lambda u_p.
inline Vector plant_derivative(const Vector& x_p, const Vector& u_p, const PlantParams& p) {
    numerics::require_size(x_p, p.n(), "plant_derivative: x_p");
    numerics::require_size(u_p, p.m(), "plant_derivative: u_p");
    return p.A_p * x_p + p.B_p * p.Lambda.cwiseProduct(u_p);
}

inline Vector plant_derivative(const InnerLoopState& s, const Vector& u_p, const PlantParams& p) {
    return plant_derivative(s.x_p, u_p, p);
}

/// A_r x_r + B_r y_h(t - tau).
inline Vector reference_derivative(const Vector& x_r, const Vector& y_h_delayed, const GainSet& g) {
    numerics::require_size(x_r, g.A_r.rows(), "reference_derivative: x_r");
    numerics::require_size(y_h_delayed, g.B_r.cols(), "reference_derivative: y_h");
    return g.A_r * x_r + g.B_r * y_h_delayed;
}

/// u_p = -K_hat_x x_p + diag(lambda_hat) L_r y_h(t - tau).
inline Vector inner_control(const Vector& x_p, const Matrix& k_hat_x, const Vector& lambda_hat,
                            const Vector& y_h_delayed, const GainSet& g) {
    return -k_hat_x * x_p + lambda_hat.cwiseProduct(g.L_r * y_h_delayed);
}

inline Vector inner_control(const InnerLoopState& s, const Vector& y_h_delayed, const GainSet& g) {
    return inner_control(s.x_p, s.K_hat_x, s.lambda_hat, y_h_delayed, g);
}

struct InnerRates {
    LearningRate gamma_x{1.0};
    LearningRate gamma_lambda{1.0};
};

struct InnerAdaptation {
    Matrix K_hat_x_dot;  ///< m x n_p
    Vector lambda_hat_dot;
};

/// K_hat_x'^T = gamma_x x_p e_1^T P_1 B_p;
/// lambda_hat' = gamma_lambda Proj(lambda_hat, -diag(L_r y_h(t - tau)) B_p^T P_1 e_1).
inline InnerAdaptation inner_adaptation(const Vector& x_p, const Vector& lambda_hat,
                                        const Vector& e_1, const Vector& y_h_delayed,
                                        const Matrix& b_p, const Matrix& l_r, const Matrix& p_1,
                                        const InnerRates& rates, const ProjectionBounds& bounds) {
    const Vector pbe = b_p.transpose() * (p_1 * e_1);  // B_p^T P_1 e_1, length m
    const Matrix k_dot_t = rates.gamma_x.apply(x_p * pbe.transpose());
    const Vector y = -(l_r * y_h_delayed).cwiseProduct(pbe);
    const Matrix lam_dot = rates.gamma_lambda.apply(adaptive::proj(lambda_hat, y, bounds));
    return {k_dot_t.transpose(), lam_dot.col(0)};
}

}  // namespace adaptive_pilot::inner
