#pragma once

// Acceptance checks over a scenario. Each criterion yields one or more
// named pass/fail lines with the observed numbers; tolerances live here.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adaptive_pilot/diagnostics.hpp"
#include "adaptive_pilot/numerics/linalg.hpp"
#include "adaptive_pilot/scenario/simulation.hpp"
#include "adaptive_pilot/scenario/sweep.hpp"

namespace adaptive_pilot::verification {

using numerics::Complex;
using scenario::ScenarioConfig;

struct CheckLine {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Criterion {
    std::string key;
    std::string title;
    std::function<std::vector<CheckLine>(const ScenarioConfig&)> run;
};

namespace tol {
inline constexpr double eigenvalue = 1e-3;
inline constexpr double lyapunov_residual = 1e-10;
inline constexpr double care_residual = 1e-8;
inline constexpr double dc_identity = 1e-10;
inline constexpr double convergence_fraction = 0.01;
inline constexpr double convergence_horizon = 30.0;
inline constexpr double predictor_relative = 1e-2;
inline constexpr int predictor_probes = 100;
inline constexpr double transition_identity = 1e-6;
inline constexpr double transition_derivative = 1e-4;
inline constexpr double transition_cap = 1e6;
inline constexpr double figures_rms_ratio = 2.0;
inline constexpr double figures_duty_max = 0.2;
inline constexpr double sweep_tau_probe = 0.6;
inline constexpr double sweep_flag_fraction = 0.1;
inline constexpr unsigned sweep_workers = 4;
}  // namespace tol

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

inline std::string fmt(const Complex& z) {
    std::ostringstream os;
    os.precision(5);
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

/// Largest distance between computed and expected eigenvalues under the
/// best one-to-one pairing (greedy on sorted lists is enough at n <= 4).
inline double eigen_mismatch(const Matrix& a, std::vector<Complex> expected, std::string& shown) {
    auto got = numerics::eigenvalues(a);
    shown.clear();
    for (const auto& z : got) shown += (shown.empty() ? "" : ", ") + fmt(z);
    if (got.size() != expected.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& z : got) {
        auto it = std::min_element(expected.begin(), expected.end(),
                                   [&](const Complex& p, const Complex& q) { return std::abs(p - z) < std::abs(q - z); });
        worst = std::max(worst, std::abs(*it - z));
        expected.erase(it);
    }
    return worst;
}

inline ScenarioConfig without_failure(ScenarioConfig c) {
    c.events.clear();
    return c;
}

inline bool in_box(const Matrix& values, const scenario::Box& b) {
    return values.size() == 0 || (values.minCoeff() >= b.lower && values.maxCoeff() <= b.upper);
}

}  // namespace detail

inline std::vector<CheckLine> check_eigenvalues(const ScenarioConfig& c) {
    const Complex i{0.0, 1.0};
    struct Case {
        const char* name;
        const Matrix* a;
        std::vector<Complex> expected;
    };
    const std::vector<Case> cases = {
        {"A_n", &c.A_n, {-0.3750 + 0.8818 * i, -0.3750 - 0.8818 * i, -0.0005 + 0.0674 * i, -0.0005 - 0.0674 * i}},
        {"A_p", &c.plant.A_p, {0.1, 0.2, 0.3, 0.4}},
        {"A_sp", &c.A_sp, {-0.3740 + 0.8824 * i, -0.3740 - 0.8824 * i}},
    };
    std::vector<CheckLine> out;
    for (const auto& k : cases) {
        std::string shown;
        const double err = detail::eigen_mismatch(*k.a, k.expected, shown);
        out.push_back({std::string("eigenvalues of ") + k.name, err <= tol::eigenvalue,
                       "max deviation " + detail::fmt(err) + " [" + shown + "]"});
    }
    return out;
}

inline std::vector<CheckLine> check_lyapunov(const ScenarioConfig& c) {
    std::vector<CheckLine> out;
    const auto g = scenario::build_gains(c);
    const Matrix q = 0.001 * Matrix::Identity(c.n(), c.n());
    for (const auto& [name, a] : {std::pair<const char*, const Matrix*>{"A_r", &g.A_r}, {"A_m", &g.A_m}}) {
        const Matrix p = numerics::solve_lyapunov(*a, q);
        const double res = (a->transpose() * p + p * *a + q).norm();
        out.push_back({std::string("Lyapunov residual for ") + name, res <= tol::lyapunov_residual,
                       "residual " + detail::fmt(res)});
    }
    const auto care = numerics::solve_care(g.A_r, g.B_r, c.Q_lqr, c.R_lqr);
    const double res = numerics::care_residual(g.A_r, g.B_r, c.Q_lqr, c.R_lqr, care.P).norm();
    out.push_back({"CARE residual for the LQR design", res <= tol::care_residual,
                   "residual " + detail::fmt(res) + " after " + std::to_string(care.iterations) + " iterations"});
    const double abscissa = numerics::spectral_abscissa(g.A_m);
    out.push_back({"A_m Hurwitz", abscissa < 0.0, "spectral abscissa " + detail::fmt(abscissa)});
    return out;
}

inline std::vector<CheckLine> check_design(const ScenarioConfig& c) {
    std::vector<CheckLine> out;
    const auto g = scenario::build_gains(c);
    if (c.feedforward == scenario::FeedforwardMode::ShortPeriod) {
        const Matrix dc = -c.C_sp.transpose() * c.A_sp.partialPivLu().solve(c.B_sp) * g.L_r;
        const double err = (dc - Matrix::Identity(dc.rows(), dc.cols())).norm();
        out.push_back({"short-period DC gain with L_r", err <= tol::dc_identity,
                       "L_r = " + detail::fmt(g.L_r(0, 0)) + ", |dc - I| = " + detail::fmt(err)});
    }
    const Matrix dc2 = -c.plant.C_2.transpose() * g.A_m.partialPivLu().solve(g.B_r) * g.theta_r;
    const double err2 = (dc2 - Matrix::Identity(dc2.rows(), dc2.cols())).norm();
    out.push_back({"crossover DC gain with theta_r", err2 <= tol::dc_identity,
                   "theta_r = " + detail::fmt(g.theta_r(0, 0)) + ", |dc - I| = " + detail::fmt(err2)});
    bool singular = false;
    std::string what = "no exception";
    try {
        adaptive::compute_Lr(g.A_r, c.plant.B_p, c.plant.C_1);
    } catch (const SingularDCGain& e) {
        singular = true;
        what = e.what();
    }
    out.push_back({"full-state L_r raises SingularDCGain", singular, what});
    return out;
}

inline std::vector<CheckLine> check_inner_convergence(const ScenarioConfig& base) {
    ScenarioConfig c = detail::without_failure(base);
    c.inner_rates.gamma_x = 1.0;
    const Vector y_h = Vector::Ones(c.m());
    const auto log = scenario::simulate_inner_loop(c, y_h, tol::convergence_horizon);
    Index peak_at = 0;
    log.e_1_norm.maxCoeff(&peak_at);
    const double peak = log.e_1_norm(peak_at);
    const double final_err = log.e_1_norm(log.e_1_norm.size() - 1);
    double crossed = -1.0;
    for (Index k = peak_at; k < log.e_1_norm.size(); ++k) {
        if (log.e_1_norm(k) < tol::convergence_fraction * peak) {
            crossed = log.t(k);
            break;
        }
    }
    std::vector<CheckLine> out;
    out.push_back({"inner error below 1% of peak within 30 s", peak > 0.0 && crossed >= 0.0,
                   "peak " + detail::fmt(peak) + " at t=" + detail::fmt(log.t(peak_at)) + ", |e_1(30)| = " +
                       detail::fmt(final_err) + (crossed >= 0 ? ", first below 1% at t=" + detail::fmt(crossed) : "")});
    out.push_back({"lambda_hat inside [0.1, 10] at every step", detail::in_box(log.lambda_hat, c.lambda_bounds),
                   "range [" + detail::fmt(log.lambda_hat.minCoeff()) + ", " + detail::fmt(log.lambda_hat.maxCoeff()) + "]"});
    return out;
}

/// Relative prediction errors at evenly spaced probe times of a no-failure run.
inline std::vector<double> predictor_errors(const ScenarioConfig& c, const scenario::SimLog& log,
                                            const adaptive::GainSet& g, int intervals, int probes,
                                            double first, double last) {
    const auto sys = diagnostics::TimeVaryingSystem::from_log(log, c, g);
    const auto y_h = diagnostics::y_h_series(log);
    std::vector<double> errs;
    for (int k = 0; k < probes; ++k) {
        const double raw = first + (last - first) * k / std::max(1, probes - 1);
        const double t = std::round(raw / log.step) * log.step;
        const Index i = log.index_of(t);
        const Index j = log.index_of(t + c.tau);
        const Vector pred = diagnostics::predict_state(sys, log.x_p.col(i), y_h, g.L_r, c.tau, log.t(i), intervals);
        const Vector actual = log.x_p.col(j);
        errs.push_back((pred - actual).norm() / actual.norm());
    }
    return errs;
}

inline std::vector<CheckLine> check_predictor(const ScenarioConfig& base) {
    ScenarioConfig c = detail::without_failure(base);
    c.duration = std::min(c.duration, 40.0);
    c.metrics_start = std::min(c.metrics_start, c.duration - 1.0);
    c.metrics_end = c.duration;
    const auto log = scenario::run_simulation(c);
    const auto g = scenario::build_gains(c);
    const double first = 6.0, last = std::min(34.0, log.end_time() - c.tau);
    const auto e5 = predictor_errors(c, log, g, c.intervals, tol::predictor_probes, first, last);
    const auto e40 = predictor_errors(c, log, g, 40, tol::predictor_probes, first, last);
    const double max5 = *std::max_element(e5.begin(), e5.end());
    double mean5 = 0.0, mean40 = 0.0;
    for (double e : e5) mean5 += e / static_cast<double>(e5.size());
    for (double e : e40) mean40 += e / static_cast<double>(e40.size());
    return {
        {"relative prediction error <= 1e-2 at 100 probes (N = " + std::to_string(c.intervals) + ")",
         max5 <= tol::predictor_relative, "max " + detail::fmt(max5) + ", mean " + detail::fmt(mean5)},
        {"prediction error decreases with N = 40", mean40 < mean5,
         "mean " + detail::fmt(mean5) + " -> " + detail::fmt(mean40)},
    };
}

inline std::vector<CheckLine> check_transition(const ScenarioConfig& c) {
    const auto log = scenario::run_simulation(c);
    const auto g = scenario::build_gains(c);
    const auto sys = diagnostics::TimeVaryingSystem::from_log(log, c, g);
    const Index n = c.n();
    const Matrix eye = Matrix::Identity(n, n);
    std::vector<CheckLine> out;

    bool exact = true;
    for (double t : {0.0, 12.345, 35.0, log.end_time()}) {
        exact = exact && (diagnostics::transition_matrix(sys, t, t).array() == eye.array()).all();
    }
    out.push_back({"Phi(t, t) = I exactly", exact, "checked at 4 times"});

    double comp = 0.0, inv = 0.0;
    for (double t1 : {3.0, 17.2, 33.9, 50.0}) {
        const double t2 = t1 + 0.7, t3 = t1 + 1.9;
        const Matrix direct = diagnostics::transition_matrix(sys, t3, t1);
        const Matrix chained = diagnostics::transition_matrix(sys, t3, t2) * diagnostics::transition_matrix(sys, t2, t1);
        comp = std::max(comp, (direct - chained).norm());
        inv = std::max(inv, (diagnostics::transition_matrix(sys, t2, t1) * diagnostics::transition_matrix(sys, t1, t2) - eye).norm());
    }
    out.push_back({"composition identity", comp <= tol::transition_identity, "max error " + detail::fmt(comp)});
    out.push_back({"inverse identity", inv <= tol::transition_identity, "max error " + detail::fmt(inv)});

    double sup = 0.0;
    for (double t = 0.0; t + c.tau <= log.end_time() + 1e-9; t += 0.1) {
        const double tt = std::round(t / log.step) * log.step;
        sup = std::max(sup, diagnostics::transition_matrix(sys, tt + c.tau, tt).norm());
    }
    out.push_back({"sup |Phi(t + tau, t)| finite over the run", std::isfinite(sup) && sup < tol::transition_cap,
                   "sup " + detail::fmt(sup)});

    // d/dt Phi(t + tau, t) = A(t + tau) Phi - Phi A(t): fourth-order central
    // differences at grid-aligned probes every 0.5 s. A(t) jumps at failure
    // events, so stencils touching one are skipped.
    const double d = log.step;
    double fd = 0.0, fd_at = 0.0;
    int probes = 0;
    auto phi = [&](double s) { return diagnostics::transition_matrix(sys, s + c.tau, s); };
    for (double raw = 0.5; raw + c.tau + 2.0 * d <= log.end_time(); raw += 0.5) {
        const double t = std::round(raw / d) * d;
        bool touches_event = false;
        for (const auto& ev : c.events) {
            touches_event = touches_event || (ev.time >= t - 3.0 * d && ev.time <= t + c.tau + 3.0 * d);
        }
        if (touches_event) continue;
        const Matrix numeric = (phi(t - 2.0 * d) - 8.0 * phi(t - d) + 8.0 * phi(t + d) - phi(t + 2.0 * d)) / (12.0 * d);
        const Matrix p = phi(t);
        const double err = (numeric - (sys.A(t + c.tau) * p - p * sys.A(t))).norm();
        ++probes;
        if (err > fd) {
            fd = err;
            fd_at = t;
        }
    }
    out.push_back({"derivative identity vs central differences", fd <= tol::transition_derivative,
                   "max error " + detail::fmt(fd) + " at t=" + detail::fmt(fd_at) + " over " +
                       std::to_string(probes) + " probes"});
    return out;
}

inline std::vector<CheckLine> check_boundedness(const ScenarioConfig& c) {
    const auto result = scenario::simulate(c);
    const auto& log = result.log;
    std::vector<CheckLine> out;
    out.push_back({"run completes without NonFiniteState", !result.failure && log.end_time() >= c.duration - 1e-9,
                   result.failure ? std::string(result.failure->what()) : "reached t = " + detail::fmt(log.end_time())});
    if (log.count == 0) return out;

    const bool boxes = detail::in_box(log.lambda_hat, c.lambda_bounds) &&
                       detail::in_box(log.lambda2_hat, c.lambda2_bounds) &&
                       detail::in_box(log.lambda3_hat, c.lambda3_bounds) &&
                       detail::in_box(log.Phi1_hat, c.phi1_bounds) && detail::in_box(log.Phi2_hat, c.phi2_bounds) &&
                       (!c.k_x_bounds || detail::in_box(log.K_hat_x, *c.k_x_bounds));
    out.push_back({"adaptive parameters inside projection boxes", boxes,
                   "lambda " + detail::fmt(log.lambda_hat.minCoeff()) + ".." + detail::fmt(log.lambda_hat.maxCoeff()) +
                       ", lambda2 " + detail::fmt(log.lambda2_hat.minCoeff()) + ".." + detail::fmt(log.lambda2_hat.maxCoeff()) +
                       ", lambda3 " + detail::fmt(log.lambda3_hat.minCoeff()) + ".." + detail::fmt(log.lambda3_hat.maxCoeff()) +
                       ", |Phi1|max " + detail::fmt(log.Phi1_hat.cwiseAbs().maxCoeff()) +
                       ", |Phi2|max " + detail::fmt(log.Phi2_hat.cwiseAbs().maxCoeff())});

    bool identity = true;
    for (Index k = 0; k < log.count; ++k) {
        identity = identity && (log.e_y.col(k).array() == (log.e_2.col(k) - log.e_delta.col(k)).array()).all();
    }
    out.push_back({"e_y = e_2 - e_delta exactly per sample", identity, std::to_string(log.count) + " samples"});

    bool saturated_ok = true;
    for (Index k = 0; k < log.count; ++k) {
        saturated_ok = saturated_ok && (log.y_h.col(k).cwiseAbs().array() <= log.y_o.array()).all();
    }
    out.push_back({"|y_h_i| <= y_o_i per sample", saturated_ok,
                   "max |y_h| " + detail::fmt(log.y_h.cwiseAbs().maxCoeff()) + " vs y_o " + detail::fmt(log.y_o.minCoeff())});

    double sup = 0.0;
    for (const Matrix* s : {&log.x_p, &log.x_m, &log.e_delta, &log.e_y, &log.y_h, &log.u_p}) {
        sup = std::max(sup, s->cwiseAbs().maxCoeff());
    }
    double peak_e_y = 0.0;
    for (Index k = 0; k < log.count; ++k) peak_e_y = std::max(peak_e_y, log.e_y_norm(k));
    out.push_back({"signals below sup-norm caps", sup <= c.signal_cap && peak_e_y <= c.e_y_cap,
                   "max |signal| " + detail::fmt(sup) + ", peak |e_y| " + detail::fmt(peak_e_y)});
    return out;
}

inline std::vector<CheckLine> check_figures(const ScenarioConfig& base) {
    ScenarioConfig fast = base, slow = base;
    fast.inner_rates.gamma_x = 1.0;
    slow.inner_rates.gamma_x = 0.01;
    const auto m1 = diagnostics::compute_metrics(scenario::run_simulation(fast), fast);
    const auto m2 = diagnostics::compute_metrics(scenario::run_simulation(slow), slow);
    const double ratio = m2.rms_tracking_error / m1.rms_tracking_error;
    return {
        {"RMS tracking error ratio (gamma_x 0.01 / 1) >= 2", ratio >= tol::figures_rms_ratio,
         "rms " + detail::fmt(m2.rms_tracking_error) + " / " + detail::fmt(m1.rms_tracking_error) + " = " + detail::fmt(ratio)},
        {"saturation duty cycle larger for gamma_x = 0.01", m2.saturation_duty_cycle > m1.saturation_duty_cycle,
         "duty " + detail::fmt(m2.saturation_duty_cycle) + " vs " + detail::fmt(m1.saturation_duty_cycle)},
        {"gamma_x = 1 duty cycle < 0.2", m1.saturation_duty_cycle < tol::figures_duty_max,
         "duty " + detail::fmt(m1.saturation_duty_cycle)},
    };
}

inline std::vector<CheckLine> check_determinism(const ScenarioConfig& c) {
    std::string csv[2];
    for (auto& text : csv) {
        std::ostringstream os;
        scenario::write_csv(os, scenario::run_simulation(c), c.csv_stride);
        text = os.str();
    }
    return {{"identical config gives identical run CSV bytes", csv[0] == csv[1],
             std::to_string(csv[0].size()) + " bytes"}};
}

inline std::vector<CheckLine> check_sweep(const ScenarioConfig& c) {
    const auto rows = scenario::run_sweep(c, tol::sweep_workers);
    const auto flagged = scenario::monotonicity_flags(rows);
    std::size_t columns = c.sweep_scale.size();
    std::string table;
    for (const auto& r : rows) {
        table += (table.empty() ? "" : " ") + detail::fmt(r.tau) + "/" + detail::fmt(r.scale) + ":" + (r.bounded ? "B" : "D");
    }
    const bool has_probe = std::find(c.sweep_tau.begin(), c.sweep_tau.end(), tol::sweep_tau_probe) != c.sweep_tau.end();
    return {
        {"boundedness non-improving with scale at tau = 0.6",
         has_probe && scenario::boundedness_non_improving(rows, tol::sweep_tau_probe), table},
        {"monotonicity flags in <= 10% of columns",
         static_cast<double>(flagged.size()) <= tol::sweep_flag_fraction * static_cast<double>(columns),
         std::to_string(flagged.size()) + " of " + std::to_string(columns) + " flagged"},
    };
}

inline const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {"eigenvalues", "Eigenvalue regression", check_eigenvalues},
        {"lyapunov", "Solver residuals", check_lyapunov},
        {"design", "Design identities", check_design},
        {"inner_convergence", "Inner-loop convergence", check_inner_convergence},
        {"predictor", "Predictor oracle", check_predictor},
        {"transition", "Transition-matrix properties", check_transition},
        {"boundedness", "Boundedness of the builtin run", check_boundedness},
        {"figures", "Learning-rate comparison", check_figures},
        {"determinism", "Determinism", check_determinism},
        {"sweep", "Delay vs learning-rate trend", check_sweep},
    };
    return all;
}

/// Runs one criterion; exceptions become a single failing line.
inline std::vector<CheckLine> run_criterion(const Criterion& crit, const ScenarioConfig& c) {
    try {
        return crit.run(c);
    } catch (const std::exception& e) {
        return {{crit.title, false, std::string("error: ") + e.what()}};
    }
}

}  // namespace adaptive_pilot::verification
