#pragma once

// Coupled fixed-step simulation of plant, reference model, inner adaptive
// controller and delayed adaptive pilot.

#include <optional>
#include <string>
#include <vector>

#include "adaptive_pilot/inner_loop.hpp"
#include "adaptive_pilot/numerics/history_buffer.hpp"
#include "adaptive_pilot/numerics/integrator.hpp"
#include "adaptive_pilot/pilot_model.hpp"
#include "adaptive_pilot/scenario/config.hpp"
#include "adaptive_pilot/scenario/sim_log.hpp"

namespace adaptive_pilot::scenario {

/// Offsets of each continuous state block inside the flat integrator vector.
struct StateLayout {
    Index n = 0, m = 0;
    int nodes = 0;
    Index x_p = 0, x_r = 0, x_m = 0, e_delta = 0, K_x = 0, lambda = 0, lambda2 = 0, lambda3 = 0,
          Phi1 = 0, Phi2 = 0, size = 0;

    StateLayout() = default;
    StateLayout(Index n_, Index m_, int nodes_) : n(n_), m(m_), nodes(nodes_) {
        Index at = 0;
        auto take = [&](Index len) {
            const Index start = at;
            at += len;
            return start;
        };
        x_p = take(n);
        x_r = take(n);
        x_m = take(n);
        e_delta = take(n);
        K_x = take(m * n);
        lambda = take(m);
        lambda2 = take(m);
        lambda3 = take(m);
        Phi1 = take(m * n);
        Phi2 = take(m * m * nodes);
        size = at;
    }

    /// Name of the block containing flat index i.
    std::string block_name(Index i) const {
        const std::pair<Index, const char*> blocks[] = {
            {x_r, "x_p"},       {x_m, "x_r"},       {e_delta, "x_m"},    {K_x, "e_delta"},
            {lambda, "K_hat_x"}, {lambda2, "lambda_hat"}, {lambda3, "lambda2_hat"},
            {Phi1, "lambda3_hat"}, {Phi2, "Phi1_hat"}, {size, "Phi2_hat"}};
        for (const auto& [end, name] : blocks) {
            if (i < end) return name;
        }
        return "state";
    }
};

/// Outcome of a run: the log up to the last committed sample, plus the
/// divergence that stopped it, if any.
struct RunResult {
    SimLog log;
    std::optional<NonFiniteState> failure;
};

class Simulation {
public:
    explicit Simulation(ScenarioConfig config)
        : cfg_((validate(config), std::move(config))),
          gains_(build_gains(cfg_)),
          layout_(cfg_.n(), cfg_.m(), cfg_.intervals),
          quad_{cfg_.tau, cfg_.intervals},
          y_o_(cfg_.y_o.crad()),
          lambda_true_(cfg_.plant.Lambda),
          y_h_hist_(cfg_.m(), cfg_.step, 2.0 * cfg_.tau + cfg_.step),
          G_hist_(cfg_.m(), cfg_.step, cfg_.tau + cfg_.step),
          dy_hist_(cfg_.m(), cfg_.step, cfg_.tau + cfg_.step),
          xp_hist_(cfg_.n(), cfg_.step, cfg_.tau + cfg_.step) {
        const Index n = cfg_.n(), m = cfg_.m();
        const double f = cfg_.margin_fraction;
        lambda_bounds_ = make_bounds(m, 1, cfg_.lambda_bounds, f);
        outer_bounds_.lambda2 = make_bounds(m, 1, cfg_.lambda2_bounds, f);
        outer_bounds_.lambda3 = make_bounds(m, 1, cfg_.lambda3_bounds, f);
        outer_bounds_.phi1 = make_bounds(n, m, cfg_.phi1_bounds, f);
        outer_bounds_.phi2 = make_bounds(m, m, cfg_.phi2_bounds, f);
        if (cfg_.k_x_bounds) k_x_bounds_ = make_bounds(m, n, *cfg_.k_x_bounds, f);
    }

    const ScenarioConfig& config() const noexcept { return cfg_; }
    const adaptive::GainSet& gains() const noexcept { return gains_; }
    const StateLayout& layout() const noexcept { return layout_; }

    /// Initial flat state: zero dynamics, lambda's at their init values,
    /// Phi1_hat at its configured initial value, K_hat_x and Phi2_hat zero.
    Vector initial_state() const {
        Vector x = Vector::Zero(layout_.size);
        x.segment(layout_.lambda, cfg_.m()).setConstant(cfg_.lambda_init);
        x.segment(layout_.lambda2, cfg_.m()).setConstant(cfg_.lambda2_init);
        x.segment(layout_.lambda3, cfg_.m()).setConstant(cfg_.lambda3_init);
        const Matrix phi1 = phi1_initial(cfg_, gains_);
        x.segment(layout_.Phi1, phi1.size()) = Eigen::Map<const Vector>(phi1.data(), phi1.size());
        return x;
    }

    RunResult run() {
        const auto steps = static_cast<Index>(std::floor(cfg_.duration / cfg_.step + 1e-9));
        RunResult result;
        SimLog& log = result.log;
        log.step = cfg_.step;
        log.tau = cfg_.tau;
        log.y_o = y_o_;
        log.allocate(cfg_.n(), cfg_.m(), cfg_.intervals, steps + 1);

        Vector x = initial_state();
        lambda_true_ = lambda_at(cfg_, 0.0);
        commit(0.0, x, log);

        auto system = [this](double s, const Vector& state) { return evaluate(s, state).derivative; };
        try {
            for (Index k = 0; k < steps; ++k) {
                const double t = static_cast<double>(k) * cfg_.step;
                Vector next = numerics::rk4_step(system, t, x, cfg_.step);
                clamp_parameters(next);
                x = std::move(next);
                const double t_next = static_cast<double>(k + 1) * cfg_.step;
                lambda_true_ = lambda_at(cfg_, t_next);
                commit(t_next, x, log);
            }
        } catch (const NonFiniteState& e) {
            result.failure = e;
        }
        log.shrink_to_count();
        return result;
    }

    /// Algebraic signals and the full state derivative at stage time s.
    struct Evaluation {
        pilot::PilotCommand command;
        Vector y_h_delayed;
        Vector u_p;
        Vector e_1, e_2, e_y;
        Vector derivative;
    };

    Evaluation evaluate(double s, const Vector& state) const {
        if (!state.allFinite()) {
            for (Index i = 0; i < state.size(); ++i) {
                if (!std::isfinite(state(i))) throw NonFiniteState(s, layout_.block_name(i));
            }
        }
        const Index n = cfg_.n(), m = cfg_.m();
        const StateLayout& L = layout_;
        const auto& g = gains_;
        const Matrix& b_p = cfg_.plant.B_p;
        const bool delayed = cfg_.tau > 0.0;

        const Vector x_p = state.segment(L.x_p, n);
        const Vector x_r = state.segment(L.x_r, n);
        const Vector x_m = state.segment(L.x_m, n);
        const Vector e_delta = state.segment(L.e_delta, n);
        Matrix k_hat = Eigen::Map<const Matrix>(state.data() + L.K_x, m, n);
        if (k_x_bounds_) k_hat = k_x_bounds_->clamp(k_hat);
        const Vector lambda = lambda_bounds_.clamp(state.segment(L.lambda, m));
        pilot::OuterLoopState outer;
        outer.lambda2_hat = outer_bounds_.lambda2.clamp(state.segment(L.lambda2, m));
        outer.lambda3_hat = outer_bounds_.lambda3.clamp(state.segment(L.lambda3, m));
        outer.Phi1_hat =
            outer_bounds_.phi1.clamp(Eigen::Map<const Matrix>(state.data() + L.Phi1, m, n).transpose())
                .transpose();
        outer.Phi2_hat.reserve(L.nodes);
        for (int k = 0; k < L.nodes; ++k) {
            const Matrix node = Eigen::Map<const Matrix>(state.data() + L.Phi2 + k * m * m, m, m);
            outer.Phi2_hat.push_back(outer_bounds_.phi2.clamp(node.transpose()).transpose());
        }

        Evaluation ev;
        std::vector<Vector> nodes;
        nodes.reserve(L.nodes);
        for (int k = 0; k < L.nodes; ++k) {
            nodes.push_back(delayed ? y_h_hist_.at_time(s + quad_.node(k)) : Vector(Vector::Zero(m)));
        }
        ev.command = pilot::pilot_command(x_p, reference_at(cfg_, s), outer.lambda2_hat,
                                          outer.Phi1_hat, outer.Phi2_hat, nodes, g, y_o_, quad_);
        const auto& cmd = ev.command;
        ev.y_h_delayed = delayed ? y_h_hist_.at_time(s - cfg_.tau) : cmd.y_h;
        ev.u_p = inner::inner_control(x_p, k_hat, lambda, ev.y_h_delayed, g);
        const Vector dy_delayed = delayed ? dy_hist_.at_time(s - cfg_.tau) : cmd.delta_y;

        ev.e_1 = x_p - x_r;
        ev.e_2 = x_p - x_m;
        ev.e_y = ev.e_2 - e_delta;

        Vector d = Vector::Zero(L.size);
        d.segment(L.x_p, n) = b_p * lambda_true_.cwiseProduct(ev.u_p) + cfg_.plant.A_p * x_p;
        d.segment(L.x_r, n) = inner::reference_derivative(x_r, ev.y_h_delayed, g);
        d.segment(L.x_m, n) = pilot::crossover_derivative(x_m, reference_at(cfg_, s - cfg_.tau), g);
        d.segment(L.e_delta, n) =
            pilot::aux_error_derivative(e_delta, dy_delayed, outer.lambda3_hat, b_p, g);

        auto inner_dot = inner::inner_adaptation(x_p, lambda, ev.e_1, ev.y_h_delayed, b_p, g.L_r,
                                                 g.P_1, cfg_.inner_rates, lambda_bounds_);
        if (k_x_bounds_) inner_dot.K_hat_x_dot = adaptive::proj(k_hat, inner_dot.K_hat_x_dot, *k_x_bounds_);
        d.segment(L.K_x, m * n) = Eigen::Map<const Vector>(inner_dot.K_hat_x_dot.data(), m * n);
        d.segment(L.lambda, m) = inner_dot.lambda_hat_dot;

        pilot::OuterDelayedInputs in;
        in.G = delayed ? G_hist_.at_time(s - cfg_.tau) : cmd.G;
        in.delta_y = dy_delayed;
        in.x_p = delayed ? xp_hist_.at_time(s - cfg_.tau) : x_p;
        in.y_h_nodes.reserve(L.nodes);
        for (int k = 0; k < L.nodes; ++k) {
            in.y_h_nodes.push_back(delayed ? y_h_hist_.at_time(s + quad_.node(k) - cfg_.tau) : cmd.y_h);
        }
        const auto outer_dot =
            pilot::outer_adaptation(ev.e_y, in, outer, b_p, g, cfg_.outer_rates, outer_bounds_);
        d.segment(L.lambda2, m) = outer_dot.lambda2_hat_dot;
        d.segment(L.lambda3, m) = outer_dot.lambda3_hat_dot;
        d.segment(L.Phi1, m * n) = Eigen::Map<const Vector>(outer_dot.Phi1_hat_dot.data(), m * n);
        for (int k = 0; k < L.nodes; ++k) {
            d.segment(L.Phi2 + k * m * m, m * m) =
                Eigen::Map<const Vector>(outer_dot.Phi2_hat_dot[k].data(), m * m);
        }
        ev.derivative = std::move(d);
        return ev;
    }

private:
    // Committed parameters are held inside their boxes; RK4 stages can
    // overshoot the boundary layer when a rate is large relative to the margin.
    void clamp_parameters(Vector& x) const {
        const Index n = cfg_.n(), m = cfg_.m();
        const StateLayout& L = layout_;
        x.segment(L.lambda, m) = lambda_bounds_.clamp(x.segment(L.lambda, m));
        x.segment(L.lambda2, m) = outer_bounds_.lambda2.clamp(x.segment(L.lambda2, m));
        x.segment(L.lambda3, m) = outer_bounds_.lambda3.clamp(x.segment(L.lambda3, m));
        // Phi1 bounds are uniform, so the transposed layout does not matter here.
        Eigen::Map<Matrix> phi1(x.data() + L.Phi1, m, n);
        phi1 = phi1.cwiseMax(outer_bounds_.phi1.lower(0, 0)).cwiseMin(outer_bounds_.phi1.upper(0, 0));
        Eigen::Map<Vector> phi2(x.data() + L.Phi2, m * m * L.nodes);
        phi2 = phi2.cwiseMax(outer_bounds_.phi2.lower(0, 0)).cwiseMin(outer_bounds_.phi2.upper(0, 0));
        if (k_x_bounds_) {
            Eigen::Map<Matrix> k(x.data() + L.K_x, m, n);
            k = k_x_bounds_->clamp(k);
        }
    }

    // Evaluates the algebraic signals at grid time t, appends the histories
    // and records one log sample.
    void commit(double t, const Vector& x, SimLog& log) {
        const Evaluation ev = evaluate(t, x);
        const auto& cmd = ev.command;
        if (!cmd.G.allFinite()) throw NonFiniteState(t, "G");
        if (!cmd.v.allFinite()) throw NonFiniteState(t, "v");
        if (!ev.u_p.allFinite()) throw NonFiniteState(t, "u_p");
        if (!ev.derivative.allFinite()) throw NonFiniteState(t, "state derivative");
        y_h_hist_.push(cmd.y_h);
        G_hist_.push(cmd.G);
        dy_hist_.push(cmd.delta_y);
        xp_hist_.push(x.segment(layout_.x_p, cfg_.n()));

        const Index n = cfg_.n(), m = cfg_.m();
        const StateLayout& L = layout_;
        const Index k = log.count++;
        log.t(k) = t;
        log.x_p.col(k) = x.segment(L.x_p, n);
        log.x_r.col(k) = x.segment(L.x_r, n);
        log.x_m.col(k) = x.segment(L.x_m, n);
        log.e_delta.col(k) = x.segment(L.e_delta, n);
        log.e_1.col(k) = ev.e_1;
        log.e_2.col(k) = ev.e_2;
        log.e_y.col(k) = ev.e_y;
        log.y_h.col(k) = cmd.y_h;
        log.v.col(k) = cmd.v;
        log.delta_y.col(k) = cmd.delta_y;
        log.G.col(k) = cmd.G;
        log.u_p.col(k) = ev.u_p;
        log.y_1.col(k) = inner::output_y1(log.x_p.col(k), cfg_.plant);
        log.y_2.col(k) = inner::output_y2(log.x_p.col(k), cfg_.plant);
        log.r.col(k) = reference_at(cfg_, t);
        log.lambda_hat.col(k) = x.segment(L.lambda, m);
        log.lambda2_hat.col(k) = x.segment(L.lambda2, m);
        log.lambda3_hat.col(k) = x.segment(L.lambda3, m);
        log.phi1_fro(k) = x.segment(L.Phi1, m * n).norm();
        for (int j = 0; j < L.nodes; ++j) log.phi2_fro(j, k) = x.segment(L.Phi2 + j * m * m, m * m).norm();
        log.K_hat_x.col(k) = x.segment(L.K_x, m * n);
        log.Phi1_hat.col(k) = x.segment(L.Phi1, m * n);
        log.Phi2_hat.col(k) = x.segment(L.Phi2, m * m * L.nodes);
        log.Lambda.col(k) = lambda_true_;
    }

    ScenarioConfig cfg_;
    adaptive::GainSet gains_;
    StateLayout layout_;
    pilot::DelayQuadrature quad_;
    Vector y_o_;
    Vector lambda_true_;
    adaptive::ProjectionBounds lambda_bounds_;
    pilot::OuterBounds outer_bounds_;
    std::optional<adaptive::ProjectionBounds> k_x_bounds_;
    numerics::HistoryBuffer y_h_hist_, G_hist_, dy_hist_, xp_hist_;
};

/// Runs the scenario and returns the log, capturing divergence instead of throwing.
inline RunResult simulate(const ScenarioConfig& config) { return Simulation(config).run(); }

/// Runs the scenario; throws NonFiniteState on divergence.
inline SimLog run_simulation(const ScenarioConfig& config) {
    auto result = simulate(config);
    if (result.failure) throw *result.failure;
    return std::move(result.log);
}

// ---------------------------------------------------------------------------
// Inner loop in isolation, driven by a constant pilot command.

struct InnerLog {
    Vector t;
    Vector e_1_norm;
    Matrix lambda_hat;  ///< m x samples
    Matrix x_p;         ///< n x samples
    Matrix K_hat_x;     ///< (m*n) x samples
};

/// Integrates plant, reference model and inner adaptive laws with
/// y_h(t) = y_h_constant for t >= 0 (zero before), delayed by the scenario tau.
/// Lambda stays at the plant's initial value.
inline InnerLog simulate_inner_loop(const ScenarioConfig& config, const Vector& y_h_constant,
                                    double duration) {
    validate(config);
    const auto g = build_gains(config);
    const Index n = config.n(), m = config.m();
    numerics::require_size(y_h_constant, m, "simulate_inner_loop: y_h");
    const auto bounds = make_bounds(m, 1, config.lambda_bounds, config.margin_fraction);
    const Index nk = m * n;
    // [x_p, x_r, K_hat_x (col-major m x n), lambda_hat]
    Vector x = Vector::Zero(2 * n + nk + m);
    x.tail(m).setConstant(config.lambda_init);

    auto system = [&](double s, const Vector& st) {
        const Vector x_p = st.head(n), x_r = st.segment(n, n);
        const Matrix k_hat = Eigen::Map<const Matrix>(st.data() + 2 * n, m, n);
        const Vector lam = bounds.clamp(st.tail(m));
        const Vector y_d = s - config.tau >= 0.0 ? y_h_constant : Vector(Vector::Zero(m));
        const Vector u_p = inner::inner_control(x_p, k_hat, lam, y_d, g);
        const Vector e_1 = x_p - x_r;
        const auto dot = inner::inner_adaptation(x_p, lam, e_1, y_d, config.plant.B_p, g.L_r, g.P_1,
                                                 config.inner_rates, bounds);
        Vector d(st.size());
        d.head(n) = inner::plant_derivative(x_p, u_p, config.plant);
        d.segment(n, n) = inner::reference_derivative(x_r, y_d, g);
        d.segment(2 * n, nk) = Eigen::Map<const Vector>(dot.K_hat_x_dot.data(), nk);
        d.tail(m) = dot.lambda_hat_dot;
        return d;
    };

    const auto steps = static_cast<Index>(std::floor(duration / config.step + 1e-9));
    InnerLog log;
    log.t.resize(steps + 1);
    log.e_1_norm.resize(steps + 1);
    log.lambda_hat.resize(m, steps + 1);
    log.x_p.resize(n, steps + 1);
    log.K_hat_x.resize(nk, steps + 1);
    auto record = [&](Index k, double t) {
        log.t(k) = t;
        log.e_1_norm(k) = (x.head(n) - x.segment(n, n)).norm();
        log.lambda_hat.col(k) = x.tail(m);
        log.x_p.col(k) = x.head(n);
        log.K_hat_x.col(k) = x.segment(2 * n, nk);
    };
    record(0, 0.0);
    for (Index k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * config.step;
        x = numerics::integrate_step(system, x, t, config.step);
        x.tail(m) = bounds.clamp(x.tail(m));
        record(k + 1, static_cast<double>(k + 1) * config.step);
    }
    return log;
}

}  // namespace adaptive_pilot::scenario
