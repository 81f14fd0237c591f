#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "adaptive_pilot/diagnostics.hpp"
#include "adaptive_pilot/scenario/simulation.hpp"

using namespace adaptive_pilot;
using diagnostics::SampledSeries;
using diagnostics::TimeVaryingSystem;
using numerics::make_matrix;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kStep = 1e-3;

Matrix sample(Index dim, Index count, const std::function<Vector(double)>& f) {
    Matrix m(dim, count);
    for (Index k = 0; k < count; ++k) m.col(k) = f(static_cast<double>(k) * kStep);
    return m;
}

/// Two-state system on [0, 5] with a slowly varying H and constant Lambda_2.
TimeVaryingSystem toy_system(double h_amp = 0.3, double lambda2 = 0.8) {
    const Matrix a_r = make_matrix({{-0.5, 1.0}, {-1.0, -0.5}});
    const Matrix b_p = make_matrix({{0.0}, {1.0}});
    const Index count = 5001;
    auto h = [&](double t) { return Vector((Vector(2) << h_amp * std::sin(t), -0.5 * h_amp).finished()); };
    return {a_r, b_p, SampledSeries(0.0, kStep, sample(2, count, h)),
            SampledSeries(0.0, kStep, Matrix::Constant(1, count, lambda2))};
}

SampledSeries smooth_command() {
    return {0.0, kStep, sample(1, 5001, [](double t) { return Vector::Constant(1, std::sin(2.0 * t) + 0.5); })};
}

/// Hand-built log with the fields read by compute_metrics.
scenario::SimLog metric_log(Index count) {
    scenario::SimLog log;
    log.allocate(2, 1, 1, count);
    log.count = count;
    log.step = 0.1;
    log.y_o = Vector::Constant(1, 1.0);
    for (Index k = 0; k < count; ++k) {
        log.t(k) = 0.1 * static_cast<double>(k);
        log.y_2(0, k) = 1.0;
        log.r(0, k) = 0.0;
        log.u_p(0, k) = 2.0;
        log.y_h(0, k) = k % 2 ? 1.0 : 0.5;
        log.e_y.col(k) = Vector::Constant(2, 0.01 * static_cast<double>(k));
    }
    return log;
}

}  // namespace

TEST_CASE("SampledSeries lookups", "[series]") {
    const SampledSeries s(1.0, 0.5, make_matrix({{0.0, 2.0, 4.0}}));
    CHECK(s.at(1.5)(0) == 2.0);
    CHECK_THAT(s.at(1.25)(0), WithinAbs(1.0, 1e-15));
    CHECK(s.at(2.0 + 1e-12)(0) == 4.0);
    CHECK(s.end() == 2.0);
    CHECK_THROWS_AS(s.at(0.9), RangeNotLogged);
    CHECK_THROWS_AS(s.at(2.1), RangeNotLogged);
    CHECK_THROWS_AS(SampledSeries(0.0, 0.0, Matrix::Zero(1, 2)), ValidationError);
    CHECK_THROWS_AS(SampledSeries(0.0, 1.0, Matrix::Zero(1, 0)), ValidationError);
}

TEST_CASE("transition matrix with H = 0 is the matrix exponential", "[transition]") {
    const auto sys = toy_system(0.0);
    for (double span : {0.3, 1.0, 2.5}) {
        const Matrix expected = numerics::matrix_exponential(sys.A_r(), span);
        CHECK((diagnostics::transition_matrix(sys, 1.0 + span, 1.0) - expected).norm() <= 1e-12);
        CHECK((diagnostics::transition_matrix(sys, 1.0, 1.0 + span) - expected.inverse()).norm() <= 1e-11);
    }
}

TEST_CASE("transition matrix identities for time-varying H", "[transition][property]") {
    const auto sys = toy_system();
    CHECK(diagnostics::transition_matrix(sys, 2.0, 2.0) == Matrix::Identity(2, 2));
    for (double t : {0.5, 1.7, 3.2}) {
        const Matrix ab = diagnostics::transition_matrix(sys, t + 1.0, t);
        const Matrix a = diagnostics::transition_matrix(sys, t + 0.4, t);
        const Matrix b = diagnostics::transition_matrix(sys, t + 1.0, t + 0.4);
        CHECK((ab - b * a).norm() <= 1e-10);
        CHECK((diagnostics::transition_matrix(sys, t, t + 1.0) * ab - Matrix::Identity(2, 2)).norm() <= 1e-10);
    }
    CHECK_THROWS_AS(diagnostics::transition_matrix(sys, 6.0, 1.0), RangeNotLogged);
}

TEST_CASE("predict_state special cases", "[predictor]") {
    const auto sys = toy_system();
    const Vector x = (Vector(2) << 1.0, -0.5).finished();
    const Matrix l_r = Matrix::Constant(1, 1, -2.0);
    SECTION("zero delay returns the current state") {
        CHECK(diagnostics::predict_state(sys, x, smooth_command(), l_r, 0.0, 2.0, 5) == x);
    }
    SECTION("zero command is free propagation") {
        const SampledSeries zero(0.0, kStep, Matrix::Zero(1, 5001));
        const Vector got = diagnostics::predict_state(sys, x, zero, l_r, 0.3, 2.0, 5);
        CHECK((got - diagnostics::transition_matrix(sys, 2.3, 2.0) * x).norm() <= 1e-15);
    }
}

TEST_CASE("predictor quadrature error shrinks with more intervals", "[predictor][property]") {
    const auto sys = toy_system();
    const auto y_h = smooth_command();
    const Matrix l_r = Matrix::Constant(1, 1, -2.0);
    const double tau = 0.3, t = 2.0;
    const Vector x0 = (Vector(2) << 1.0, -0.5).finished();
    // Truth: integrate x' = A(s) x + B_p Lambda_2 L_r y_h(s - tau) on [t, t + tau].
    auto f = [&](double s, const Vector& x) {
        return Vector(sys.A(s) * x + sys.B_p() * sys.lambda2(s).asDiagonal() * (l_r * y_h.at(s - tau)));
    };
    Vector truth = x0;
    const double h = kStep / 4;
    for (int k = 0; k < 1200; ++k) truth = numerics::rk4_step(f, t + k * h, truth, h);

    double previous = std::numeric_limits<double>::infinity();
    for (int n : {5, 10, 20, 40}) {
        const double err = (diagnostics::predict_state(sys, x0, y_h, l_r, tau, t, n) - truth).norm();
        INFO("N = " << n << " error " << err);
        CHECK(err < previous);
        CHECK(err <= 0.6 * previous);
        previous = err;
    }
}

TEST_CASE("ideal values with zero H", "[ideal]") {
    auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const Index count = 2001;
    const TimeVaryingSystem sys(g.A_r, c.plant.B_p, SampledSeries(0.0, kStep, Matrix::Zero(4, count)),
                                SampledSeries(0.0, kStep, Matrix::Constant(1, count, 0.5)));
    const auto v = diagnostics::ideal_values(sys, g, c.tau, 1.0, c.intervals);
    CHECK((v.Phi1_star - scenario::phi1_initial(c, g)).norm() <= 1e-10);
    CHECK_THAT(v.lambda2_star(0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(v.lambda3_star(0), WithinAbs(0.5, 1e-15));
    REQUIRE(v.Phi2_star.size() == 5);
    const pilot::DelayQuadrature q{c.tau, c.intervals};
    for (int k = 0; k < 5; ++k) {
        const Matrix expected = -g.theta_x * numerics::matrix_exponential(g.A_r, -q.node(k)) * c.plant.B_p * 0.5;
        CHECK((v.Phi2_star[k] - expected).norm() <= 1e-10);
    }
}

TEST_CASE("system reconstruction from a logged run", "[ideal]") {
    auto c = scenario::builtin_747();
    c.duration = 2.0;
    c.events.clear();
    c.metrics_start = 0.0;
    c.metrics_end = 2.0;
    const auto g = scenario::build_gains(c);
    const auto log = scenario::run_simulation(c);
    const auto sys = TimeVaryingSystem::from_log(log, c, g);
    const Matrix k_star =
        adaptive::solve_matching(c.plant.A_p, g.A_r, c.plant.B_p, Matrix::Identity(1, 1)).K_x_star;
    CHECK((sys.H(0.0) - k_star.transpose()).norm() <= 1e-15);
    CHECK((sys.A(0.0) - (g.A_r + c.plant.B_p * k_star)).norm() <= 1e-12);
    CHECK(sys.lambda2(1.0)(0) == log.lambda_hat(0, log.index_of(1.0)));
    CHECK_THAT(sys.end(), WithinAbs(log.end_time(), 1e-12));
}

TEST_CASE("compute_metrics on a hand-built log", "[metrics]") {
    const auto log = metric_log(11);
    const auto m = diagnostics::compute_metrics(log, 0.0, 1.0);
    CHECK_THAT(m.rms_tracking_error, WithinAbs(1.0, 1e-15));
    CHECK_THAT(m.saturation_duty_cycle, WithinAbs(5.0 / 11.0, 1e-15));
    CHECK_THAT(m.control_effort, WithinAbs(4.0, 1e-12));
    CHECK_THAT(m.pilot_effort, WithinAbs(10 * 0.1 * 0.5 * (1.0 + 0.25), 1e-12));
    CHECK_THAT(m.peak_e_y, WithinAbs(0.1 * std::sqrt(2.0), 1e-15));

    const auto half = diagnostics::compute_metrics(log, 0.5, 1.0);
    CHECK_THAT(half.control_effort, WithinAbs(2.0, 1e-12));
    CHECK(half.peak_e_y == m.peak_e_y);
}

TEST_CASE("compute_metrics rejects empty windows", "[metrics]") {
    const auto log = metric_log(11);
    CHECK_THROWS_AS(diagnostics::compute_metrics(log, 1.0, 1.0), EmptyWindow);
    CHECK_THROWS_AS(diagnostics::compute_metrics(log, 5.0, 6.0), EmptyWindow);
    CHECK_THROWS_AS(diagnostics::compute_metrics(log, 0.95, 1.05), EmptyWindow);
}
