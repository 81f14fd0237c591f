#pragma once

// Adaptive human-pilot model with an internal time delay: crossover
// reference model, delayed control law with a distributed-delay integral,
// manipulator saturation, auxiliary error filter and the outer adaptive laws.

#include <vector>

#include "adaptive_pilot/adaptive/design.hpp"
#include "adaptive_pilot/adaptive/projection.hpp"
#include "adaptive_pilot/adaptive/rate.hpp"
#include "adaptive_pilot/numerics/history_buffer.hpp"

namespace adaptive_pilot::pilot {

using adaptive::GainSet;
using adaptive::LearningRate;
using adaptive::ProjectionBounds;

/// Rectangle rule over eta in [-tau, 0] with left-anchored nodes
/// eta_k = -tau + k tau / N, k = 0..N-1, all weighted tau / N.
struct DelayQuadrature {
    double tau = 0.0;
    int intervals = 5;

    double weight() const { return tau / intervals; }
    double node(int k) const { return -tau + k * weight(); }
};

struct OuterLoopState {
    Vector x_m;
    Vector e_delta;
    Vector lambda2_hat;
    Vector lambda3_hat;
    Matrix Phi1_hat;                   ///< m x n_p
    std::vector<Matrix> Phi2_hat;      ///< one m x m matrix per quadrature node

    static OuterLoopState initial(Index n, Index m, int intervals, const Matrix& phi1_init) {
        return {Vector::Zero(n),          Vector::Zero(n),
                Vector::Ones(m),          Vector::Ones(m),
                phi1_init,                std::vector<Matrix>(intervals, Matrix::Zero(m, m))};
    }
};

struct PilotCommand {
    Vector G;        ///< pre-gain command
    Vector v;        ///< unsaturated command
    Vector y_h;      ///< saturated command
    Vector delta_y;  ///< y_h - v
};

/// A_m x_m + B_m r(t - tau).
inline Vector crossover_derivative(const Vector& x_m, const Vector& r_delayed, const GainSet& g) {
    numerics::require_size(x_m, g.A_m.rows(), "crossover_derivative: x_m");
    numerics::require_size(r_delayed, g.B_m.cols(), "crossover_derivative: r");
    return g.A_m * x_m + g.B_m * r_delayed;
}

inline Vector saturate(const Vector& v, const Vector& limit) {
    return v.cwiseMax(-limit).cwiseMin(limit);
}

/// Pilot command from the node samples y_h(t + eta_k).
inline PilotCommand pilot_command(const Vector& x_p, const Vector& r, const Vector& lambda2_hat,
                                  const Matrix& phi1_hat, const std::vector<Matrix>& phi2_hat,
                                  const std::vector<Vector>& y_h_at_nodes, const GainSet& g,
                                  const Vector& y_o, const DelayQuadrature& quad) {
    if (y_h_at_nodes.size() != phi2_hat.size() ||
        static_cast<int>(phi2_hat.size()) != quad.intervals) {
        throw DimensionMismatch("pilot_command: node count mismatch");
    }
    PilotCommand c;
    c.G = phi1_hat * x_p + g.theta_r * r;
    const double w = quad.weight();
    if (w != 0.0) {
        for (std::size_t k = 0; k < phi2_hat.size(); ++k) {
            c.G += w * (phi2_hat[k] * (g.L_r * y_h_at_nodes[k]));
        }
    }
    c.v = g.L_r.partialPivLu().solve(lambda2_hat.cwiseProduct(g.L_r * c.G));
    c.y_h = saturate(c.v, y_o);
    c.delta_y = c.y_h - c.v;
    return c;
}

inline PilotCommand pilot_command(const Vector& x_p, const Vector& r, const OuterLoopState& outer,
                                  const numerics::HistoryBuffer& y_h_history, double t,
                                  const GainSet& g, const Vector& y_o,
                                  const DelayQuadrature& quad) {
    std::vector<Vector> nodes;
    nodes.reserve(quad.intervals);
    for (int k = 0; k < quad.intervals; ++k) nodes.push_back(y_h_history.at_time(t + quad.node(k)));
    return pilot_command(x_p, r, outer.lambda2_hat, outer.Phi1_hat, outer.Phi2_hat, nodes, g, y_o,
                         quad);
}

/// A_m e_delta + B_p diag(lambda3_hat) L_r delta_y(t - tau).
inline Vector aux_error_derivative(const Vector& e_delta, const Vector& delta_y_delayed,
                                   const Vector& lambda3_hat, const Matrix& b_p,
                                   const GainSet& g) {
    numerics::require_size(e_delta, g.A_m.rows(), "aux_error_derivative: e_delta");
    numerics::require_size(delta_y_delayed, b_p.cols(), "aux_error_derivative: delta_y");
    return g.A_m * e_delta + b_p * lambda3_hat.cwiseProduct(g.L_r * delta_y_delayed);
}

struct OuterRates {
    LearningRate gamma_2{1.0};
    LearningRate gamma_3{5.0};
    LearningRate gamma_phi1{1.0};  ///< scalar or length n_p (acts on Phi1_hat^T)
    LearningRate gamma_phi2{0.1};
};

struct OuterBounds {
    ProjectionBounds lambda2;  ///< m x 1
    ProjectionBounds lambda3;  ///< m x 1
    ProjectionBounds phi1;     ///< n_p x m, applied to Phi1_hat^T
    ProjectionBounds phi2;     ///< m x m, applied to each Phi2_hat^T node
};

struct OuterAdaptation {
    Vector lambda2_hat_dot;
    Vector lambda3_hat_dot;
    Matrix Phi1_hat_dot;               ///< m x n_p
    std::vector<Matrix> Phi2_hat_dot;  ///< per node, m x m
};

/// Delayed signals read by the outer adaptive laws.
struct OuterDelayedInputs {
    Vector G;                        ///< G(t - tau)
    Vector delta_y;                  ///< delta_y(t - tau)
    Vector x_p;                      ///< x_p(t - tau)
    std::vector<Vector> y_h_nodes;   ///< y_h(t + eta_k - tau)
};

inline OuterAdaptation outer_adaptation(const Vector& e_y, const OuterDelayedInputs& in,
                                        const OuterLoopState& s, const Matrix& b_p,
                                        const GainSet& g, const OuterRates& rates,
                                        const OuterBounds& bounds) {
    if (in.y_h_nodes.size() != s.Phi2_hat.size()) {
        throw DimensionMismatch("outer_adaptation: node count mismatch");
    }
    const Vector pbe = b_p.transpose() * (g.P_2 * e_y);              // B_p^T P_2 e_y
    const Matrix ey_pbl = (g.P_2 * e_y).transpose() * b_p * g.L_r;    // e_y^T P_2 B_p L_r (1 x m)

    OuterAdaptation d;
    d.lambda2_hat_dot = rates.gamma_2.apply(adaptive::proj(
        s.lambda2_hat, Vector(-(g.L_r * in.G).cwiseProduct(pbe)), bounds.lambda2)).col(0);
    d.lambda3_hat_dot = rates.gamma_3.apply(adaptive::proj(
        s.lambda3_hat, Vector((g.L_r * in.delta_y).cwiseProduct(pbe)), bounds.lambda3)).col(0);
    d.Phi1_hat_dot = rates.gamma_phi1
                         .apply(adaptive::proj(s.Phi1_hat.transpose(), -in.x_p * ey_pbl, bounds.phi1))
                         .transpose();
    d.Phi2_hat_dot.reserve(s.Phi2_hat.size());
    for (std::size_t k = 0; k < s.Phi2_hat.size(); ++k) {
        const Matrix y = -(g.L_r * in.y_h_nodes[k]) * ey_pbl;
        d.Phi2_hat_dot.push_back(
            rates.gamma_phi2.apply(adaptive::proj(s.Phi2_hat[k].transpose(), y, bounds.phi2))
                .transpose());
    }
    return d;
}

}  // namespace adaptive_pilot::pilot
