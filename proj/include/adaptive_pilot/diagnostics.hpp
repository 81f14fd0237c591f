#pragma once

// Truth oracles computed from logged runs (transition matrices, the
// one-delay-ahead state predictor, ideal adaptive parameters) and scalar
// run metrics. Nothing here feeds back into the control path.

#include <cmath>
#include <map>
#include <vector>

#include "adaptive_pilot/adaptive/design.hpp"
#include "adaptive_pilot/numerics/integrator.hpp"
#include "adaptive_pilot/pilot_model.hpp"
#include "adaptive_pilot/scenario/config.hpp"
#include "adaptive_pilot/scenario/sim_log.hpp"

namespace adaptive_pilot::diagnostics {

/// Vector signal on a uniform time grid with linear interpolation between samples.
class SampledSeries {
public:
    SampledSeries() = default;
    SampledSeries(double t0, double step, Matrix samples)
        : t0_(t0), step_(step), samples_(std::move(samples)) {
        if (!(step_ > 0.0)) throw ValidationError("SampledSeries: step must be positive");
        if (samples_.cols() == 0) throw ValidationError("SampledSeries: no samples");
    }

    double start() const { return t0_; }
    double end() const { return t0_ + static_cast<double>(samples_.cols() - 1) * step_; }
    double step() const { return step_; }
    Index dim() const { return samples_.rows(); }
    const Matrix& samples() const { return samples_; }

    Vector at(double t) const {
        const double u = (t - t0_) / step_;
        const double last = static_cast<double>(samples_.cols() - 1);
        if (u < -1e-9 || u > last + 1e-9) {
            throw RangeNotLogged("SampledSeries: t = " + std::to_string(t) + " outside [" +
                                 std::to_string(start()) + ", " + std::to_string(end()) + "]");
        }
        const double nearest = std::round(u);
        if (std::abs(u - nearest) <= 1e-9) return samples_.col(static_cast<Index>(nearest));
        const auto k = static_cast<Index>(std::floor(u));
        const double w = u - static_cast<double>(k);
        return (1.0 - w) * samples_.col(k) + w * samples_.col(k + 1);
    }

private:
    double t0_ = 0.0;
    double step_ = 1.0;
    Matrix samples_;
};

/// Inner closed loop seen as x_p' = (A_r + B_p H^T(t)) x_p + B_p Lambda_2(t) L_r y_h(t - tau),
/// with H^T = -Lambda (K_hat_x - K*_x) and Lambda_2 = Lambda diag(lambda_hat).
class TimeVaryingSystem {
public:
    /// @param H_flat     (n*m) x samples, H (n x m) stored column-major
    /// @param lambda2    m x samples, diagonal of Lambda_2
    TimeVaryingSystem(Matrix A_r, Matrix B_p, SampledSeries H_flat, SampledSeries lambda2)
        : A_r_(std::move(A_r)), B_p_(std::move(B_p)), H_(std::move(H_flat)), lambda2_(std::move(lambda2)) {
        if (H_.dim() != A_r_.rows() * B_p_.cols() || lambda2_.dim() != B_p_.cols()) {
            throw DimensionMismatch("TimeVaryingSystem: series dimensions do not match (A_r, B_p)");
        }
    }

    /// Reconstructs H and Lambda_2 from a log using the true effectiveness and
    /// the least-squares matching gain for each distinct Lambda.
    static TimeVaryingSystem from_log(const scenario::SimLog& log, const scenario::ScenarioConfig& c,
                                      const adaptive::GainSet& g) {
        const Index n = log.n, m = log.m;
        Matrix h(n * m, log.count), l2(m, log.count);
        std::map<std::vector<double>, Matrix> k_star;
        for (Index k = 0; k < log.count; ++k) {
            const Vector lam = log.Lambda.col(k);
            std::vector<double> key(lam.data(), lam.data() + m);
            auto it = k_star.find(key);
            if (it == k_star.end()) {
                const Matrix ks = adaptive::solve_matching(c.plant.A_p, g.A_r, c.plant.B_p,
                                                           numerics::diag_matrix(lam))
                                      .K_x_star;
                it = k_star.emplace(std::move(key), ks).first;
            }
            const Matrix k_hat = Eigen::Map<const Matrix>(log.K_hat_x.col(k).data(), m, n);
            const Matrix h_t = -(lam.asDiagonal() * (k_hat - it->second));  // H^T, m x n
            const Matrix h_mat = h_t.transpose();
            h.col(k) = Eigen::Map<const Vector>(h_mat.data(), n * m);
            l2.col(k) = lam.cwiseProduct(log.lambda_hat.col(k));
        }
        return {g.A_r, c.plant.B_p, SampledSeries(log.t(0), log.step, std::move(h)),
                SampledSeries(log.t(0), log.step, std::move(l2))};
    }

    double start() const { return H_.start(); }
    double end() const { return H_.end(); }
    double step() const { return H_.step(); }
    const Matrix& A_r() const { return A_r_; }
    const Matrix& B_p() const { return B_p_; }

    Matrix H(double t) const {
        const Vector v = H_.at(t);
        return Eigen::Map<const Matrix>(v.data(), A_r_.rows(), B_p_.cols());
    }
    Matrix A(double t) const { return A_r_ + B_p_ * H(t).transpose(); }
    Vector lambda2(double t) const { return lambda2_.at(t); }

private:
    Matrix A_r_, B_p_;
    SampledSeries H_;
    SampledSeries lambda2_;
};

/// Phi(t_to, t_from): integrates dPhi/ds = A(s) Phi from the identity at
/// s = t_from to s = t_to (either direction) with RK4 at the log step.
inline Matrix transition_matrix(const TimeVaryingSystem& sys, double t_to, double t_from) {
    const Index n = sys.A_r().rows();
    if (t_to == t_from) return Matrix::Identity(n, n);
    for (double t : {t_to, t_from}) {
        if (t < sys.start() - 1e-9 || t > sys.end() + 1e-9) {
            throw RangeNotLogged("transition_matrix: t = " + std::to_string(t) + " not logged");
        }
    }
    const double span = t_to - t_from;
    const auto steps = std::max<long long>(1, std::llround(std::abs(span) / sys.step()));
    const double h = span / static_cast<double>(steps);
    auto f = [&](double s, const Vector& x) {
        const Matrix phi = Eigen::Map<const Matrix>(x.data(), n, n);
        const Matrix d = sys.A(s) * phi;
        return Vector(Eigen::Map<const Vector>(d.data(), n * n));
    };
    Matrix eye = Matrix::Identity(n, n);
    Vector x = Eigen::Map<const Vector>(eye.data(), n * n);
    for (long long k = 0; k < steps; ++k) {
        x = numerics::rk4_step(f, t_from + static_cast<double>(k) * h, x, h);
    }
    return Eigen::Map<const Matrix>(x.data(), n, n);
}

/// x_p(t + tau) from x_p(t) and the pilot command history, the integral
/// taken with the same left-anchored N-node rectangle rule as the pilot.
inline Vector predict_state(const TimeVaryingSystem& sys, const Vector& x_p_t, const SampledSeries& y_h,
                            const Matrix& L_r, double tau, double t, int intervals) {
    const pilot::DelayQuadrature quad{tau, intervals};
    Vector x = transition_matrix(sys, t + tau, t) * x_p_t;
    if (tau == 0.0) return x;
    for (int k = 0; k < intervals; ++k) {
        const double eta = quad.node(k);
        const double s = t + eta + tau;
        x += quad.weight() * (transition_matrix(sys, t + tau, s) * sys.B_p() *
                              sys.lambda2(s).asDiagonal() * (L_r * y_h.at(t + eta)));
    }
    return x;
}

struct IdealValues {
    Matrix Phi1_star;               ///< m x n
    std::vector<Matrix> Phi2_star;  ///< per node, m x m
    Vector lambda2_star;
    Vector lambda3_star;
};

inline IdealValues ideal_values(const TimeVaryingSystem& sys, const adaptive::GainSet& g, double tau,
                                double t, int intervals) {
    const pilot::DelayQuadrature quad{tau, intervals};
    const Matrix h_bar = -(g.theta_x + g.L_r.partialPivLu().solve(sys.H(t + tau).transpose()));
    IdealValues v;
    v.Phi1_star = h_bar * transition_matrix(sys, t + tau, t);
    for (int k = 0; k < intervals; ++k) {
        const double s = t + quad.node(k) + tau;
        v.Phi2_star.push_back(h_bar * transition_matrix(sys, t + tau, s) * sys.B_p() *
                              sys.lambda2(s).asDiagonal());
    }
    v.lambda2_star = sys.lambda2(t + tau).cwiseInverse();
    v.lambda3_star = sys.lambda2(t);
    return v;
}

struct RunMetrics {
    double rms_tracking_error = 0.0;     ///< RMS of y_2 - r over the window, crad
    double saturation_duty_cycle = 0.0;  ///< fraction of window samples with any |y_h_i| >= y_o_i
    double control_effort = 0.0;         ///< integral of |u_p|^2 over the window
    double pilot_effort = 0.0;           ///< integral of |y_h|^2 over the window
    double peak_e_y = 0.0;               ///< max |e_y| over the whole log
};

/// Metrics over the samples with window_start <= t <= window_end.
inline RunMetrics compute_metrics(const scenario::SimLog& log, double window_start, double window_end) {
    if (log.count == 0 || !(window_end > window_start)) throw EmptyWindow("compute_metrics: empty window");
    const double eps = 1e-9 * log.step;
    Index first = -1, last = -1;
    for (Index k = 0; k < log.count; ++k) {
        if (log.t(k) >= window_start - eps && log.t(k) <= window_end + eps) {
            if (first < 0) first = k;
            last = k;
        }
    }
    if (first < 0 || last <= first) throw EmptyWindow("compute_metrics: window contains fewer than two samples");

    RunMetrics r;
    double sq = 0.0;
    Index saturated = 0;
    for (Index k = first; k <= last; ++k) {
        sq += (log.y_2.col(k) - log.r.col(k)).squaredNorm();
        if ((log.y_h.col(k).cwiseAbs().array() >= log.y_o.array()).any()) ++saturated;
    }
    const auto samples = static_cast<double>(last - first + 1);
    r.rms_tracking_error = std::sqrt(sq / samples);
    r.saturation_duty_cycle = static_cast<double>(saturated) / samples;
    for (Index k = first; k < last; ++k) {
        const double dt = log.t(k + 1) - log.t(k);
        r.control_effort += 0.5 * dt * (log.u_p.col(k).squaredNorm() + log.u_p.col(k + 1).squaredNorm());
        r.pilot_effort += 0.5 * dt * (log.y_h.col(k).squaredNorm() + log.y_h.col(k + 1).squaredNorm());
    }
    for (Index k = 0; k < log.count; ++k) r.peak_e_y = std::max(r.peak_e_y, log.e_y_norm(k));
    return r;
}

inline RunMetrics compute_metrics(const scenario::SimLog& log, const scenario::ScenarioConfig& c) {
    return compute_metrics(log, c.metrics_start, c.metrics_end);
}

/// Pilot command history of a log as a series.
inline SampledSeries y_h_series(const scenario::SimLog& log) {
    return {log.t(0), log.step, log.y_h};
}

}  // namespace adaptive_pilot::diagnostics
