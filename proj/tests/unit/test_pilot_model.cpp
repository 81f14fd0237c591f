#include <catch_amalgamated.hpp>

#include <random>

#include "adaptive_pilot/numerics/history_buffer.hpp"
#include "adaptive_pilot/pilot_model.hpp"
#include "adaptive_pilot/scenario/config.hpp"

using namespace adaptive_pilot;
using numerics::make_matrix;
using Catch::Matchers::WithinAbs;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

/// Scalar-channel gain set with L_r = 2, theta_r = 0.5 on a 2-state plant.
adaptive::GainSet toy_gains() {
    adaptive::GainSet g;
    g.L_r = Matrix::Constant(1, 1, 2.0);
    g.theta_r = Matrix::Constant(1, 1, 0.5);
    g.theta_x = make_matrix({{0.1, 0.2}});
    g.A_r = make_matrix({{-1.0, 0.0}, {0.0, -2.0}});
    g.A_m = make_matrix({{-1.0, 0.5}, {0.0, -3.0}});
    g.B_r = make_matrix({{2.0}, {0.0}});
    g.B_m = g.B_r * g.theta_r;
    g.P_1 = Matrix::Identity(2, 2);
    g.P_2 = make_matrix({{2.0, 0.5}, {0.5, 1.0}});
    return g;
}

}  // namespace

TEST_CASE("delay quadrature nodes and weights", "[quadrature]") {
    const pilot::DelayQuadrature q{0.3, 5};
    CHECK_THAT(q.weight(), WithinAbs(0.06, 1e-15));
    const double expected[] = {-0.3, -0.24, -0.18, -0.12, -0.06};
    double total = 0.0;
    for (int k = 0; k < 5; ++k) {
        CHECK_THAT(q.node(k), WithinAbs(expected[k], 1e-15));
        total += q.weight();
    }
    CHECK_THAT(total, WithinAbs(0.3, 1e-15));
    const pilot::DelayQuadrature zero{0.0, 5};
    CHECK(zero.weight() == 0.0);
    CHECK(zero.node(3) == 0.0);
}

TEST_CASE("crossover model has unit DC gain from r to y_2", "[design]") {
    const auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const double dc = (-c.plant.C_2.transpose() * g.A_m.inverse() * g.B_m)(0, 0);
    CHECK_THAT(dc, WithinAbs(1.0, 1e-10));
    CHECK(numerics::is_hurwitz(g.A_m));
}

TEST_CASE("pilot_command worked example", "[command]") {
    const auto g = toy_gains();
    const pilot::DelayQuadrature q{0.3, 3};
    const std::vector<Matrix> phi2(3, Matrix::Constant(1, 1, 0.5));
    const std::vector<Vector> nodes{vec({1.0}), vec({2.0}), vec({3.0})};
    const auto c = pilot::pilot_command(vec({0.3, 0.1}), vec({2.0}), vec({0.8}), make_matrix({{1.0, -1.0}}), phi2,
                                        nodes, g, vec({100.0}), q);
    // G = 0.3 - 0.1 + 0.5 * 2 + 0.1 * 0.5 * 2 * (1 + 2 + 3)
    CHECK_THAT(c.G(0), WithinAbs(1.8, 1e-14));
    CHECK_THAT(c.v(0), WithinAbs(0.8 * 1.8, 1e-14));
    CHECK(c.y_h(0) == c.v(0));
    CHECK(c.delta_y(0) == 0.0);
}

TEST_CASE("pilot_command saturates and reports the clipped amount", "[command]") {
    const auto g = toy_gains();
    const pilot::DelayQuadrature q{0.0, 2};
    const std::vector<Matrix> phi2(2, Matrix::Zero(1, 1));
    const std::vector<Vector> nodes(2, vec({0.0}));
    const auto c = pilot::pilot_command(vec({0.0, 0.0}), vec({10.0}), vec({1.0}), Matrix::Zero(1, 2), phi2, nodes,
                                        g, vec({1.5}), q);
    CHECK_THAT(c.v(0), WithinAbs(5.0, 1e-15));
    CHECK(c.y_h(0) == 1.5);
    CHECK_THAT(c.delta_y(0), WithinAbs(-3.5, 1e-15));
    CHECK((pilot::saturate(vec({-3.0, 0.5, 3.0}), vec({1.0, 1.0, 2.0})) - vec({-1.0, 0.5, 2.0})).isZero(0.0));
}

TEST_CASE("pilot_command integral is the left rectangle rule", "[command][quadrature]") {
    // y_h(eta) = a + b eta with unit Phi2: the sum equals
    // a tau - b tau^2 / 2 - b tau^2 / (2N).
    const auto g = toy_gains();
    const double a = 0.7, b = -1.3, tau = 0.3;
    for (int n_int : {1, 2, 5, 10, 40}) {
        const pilot::DelayQuadrature q{tau, n_int};
        std::vector<Vector> nodes;
        for (int k = 0; k < n_int; ++k) nodes.push_back(vec({a + b * q.node(k)}));
        const std::vector<Matrix> phi2(n_int, Matrix::Identity(1, 1));
        const auto c = pilot::pilot_command(vec({0.0, 0.0}), vec({0.0}), vec({1.0}), Matrix::Zero(1, 2), phi2,
                                            nodes, g, vec({1e9}), q);
        const double oracle = 2.0 * (a * tau - b * tau * tau / 2.0 - b * tau * tau / (2.0 * n_int));
        CHECK_THAT(c.G(0), WithinAbs(oracle, 1e-13));
    }
}

TEST_CASE("pilot_command rejects a node count mismatch", "[command]") {
    const auto g = toy_gains();
    const pilot::DelayQuadrature q{0.3, 3};
    CHECK_THROWS_AS(pilot::pilot_command(vec({0.0, 0.0}), vec({0.0}), vec({1.0}), Matrix::Zero(1, 2),
                                         std::vector<Matrix>(2, Matrix::Zero(1, 1)),
                                         std::vector<Vector>(2, vec({0.0})), g, vec({1.0}), q),
                    DimensionMismatch);
}

TEST_CASE("pilot_command history overload reads the quadrature nodes", "[command]") {
    const auto g = toy_gains();
    const pilot::DelayQuadrature q{0.3, 5};
    const double h = 1e-3;
    numerics::HistoryBuffer hist(1, h, 2 * q.tau + h);
    for (int k = 0; k <= 1000; ++k) hist.push(vec({std::sin(k * h)}));
    const double t = 1.0;
    auto outer = pilot::OuterLoopState::initial(2, 1, 5, make_matrix({{0.4, -0.2}}));
    for (int k = 0; k < 5; ++k) outer.Phi2_hat[k](0, 0) = 0.1 * (k + 1);
    std::vector<Vector> nodes;
    for (int k = 0; k < 5; ++k) nodes.push_back(vec({std::sin(t + q.node(k))}));
    const auto via_hist = pilot::pilot_command(vec({1.0, 2.0}), vec({0.3}), outer, hist, t, g, vec({10.0}), q);
    const auto direct = pilot::pilot_command(vec({1.0, 2.0}), vec({0.3}), outer.lambda2_hat, outer.Phi1_hat,
                                             outer.Phi2_hat, nodes, g, vec({10.0}), q);
    CHECK_THAT(via_hist.G(0), WithinAbs(direct.G(0), 1e-13));
}

TEST_CASE("auxiliary error dynamics", "[aux]") {
    const auto g = toy_gains();
    const Matrix b_p = make_matrix({{1.0}, {0.5}});
    const Vector e = vec({0.2, -0.4});
    CHECK((pilot::aux_error_derivative(e, vec({0.0}), vec({3.0}), b_p, g) - g.A_m * e).norm() <= 1e-15);
    const Vector d = pilot::aux_error_derivative(Vector::Zero(2), vec({-0.5}), vec({3.0}), b_p, g);
    CHECK((d - vec({-3.0, -1.5})).norm() <= 1e-15);
    CHECK(pilot::aux_error_derivative(Vector::Zero(2), Vector::Zero(1), vec({3.0}), b_p, g).isZero(0.0));
}

TEST_CASE("outer adaptation matches an element-wise oracle", "[adaptation]") {
    std::mt19937 rng(23);
    std::normal_distribution<double> nd;
    const Index n = 3, m = 2;
    const int nodes = 4;
    auto rnd = [&](Index r, Index c) {
        Matrix x(r, c);
        for (Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
        return x;
    };
    pilot::OuterBounds bounds{adaptive::ProjectionBounds::uniform(m, 1, -100, 100),
                              adaptive::ProjectionBounds::uniform(m, 1, -100, 100),
                              adaptive::ProjectionBounds::uniform(n, m, -100, 100),
                              adaptive::ProjectionBounds::uniform(m, m, -100, 100)};
    pilot::OuterRates rates;
    rates.gamma_2 = 1.5;
    rates.gamma_3 = 5.0;
    rates.gamma_phi1 = adaptive::LearningRate(vec({0.01, 0.1, 1.0}));
    rates.gamma_phi2 = 0.1;
    for (int trial = 0; trial < 20; ++trial) {
        adaptive::GainSet g;
        g.L_r = rnd(m, m);
        const Matrix s = rnd(n, n);
        g.P_2 = s * s.transpose() + Matrix::Identity(n, n);
        const Matrix b_p = rnd(n, m);
        auto st = pilot::OuterLoopState::initial(n, m, nodes, rnd(m, n));
        for (auto& p : st.Phi2_hat) p = rnd(m, m);
        pilot::OuterDelayedInputs in{rnd(m, 1), rnd(m, 1), rnd(n, 1), {}};
        for (int k = 0; k < nodes; ++k) in.y_h_nodes.push_back(rnd(m, 1));
        const Vector e_y = rnd(n, 1);
        const auto d = pilot::outer_adaptation(e_y, in, st, b_p, g, rates, bounds);

        const Vector pe = g.P_2 * e_y;
        for (Index j = 0; j < m; ++j) {
            double pbe = 0.0, lg = 0.0, ld = 0.0;
            for (Index a = 0; a < n; ++a) pbe += b_p(a, j) * pe(a);
            for (Index k = 0; k < m; ++k) {
                lg += g.L_r(j, k) * in.G(k);
                ld += g.L_r(j, k) * in.delta_y(k);
            }
            CHECK_THAT(d.lambda2_hat_dot(j), WithinAbs(-1.5 * lg * pbe, 1e-12));
            CHECK_THAT(d.lambda3_hat_dot(j), WithinAbs(5.0 * ld * pbe, 1e-12));
        }
        // row vector e_y^T P_2 B_p L_r
        Vector w = Vector::Zero(m);
        for (Index j = 0; j < m; ++j) {
            for (Index k = 0; k < m; ++k) {
                for (Index a = 0; a < n; ++a) w(j) += pe(a) * b_p(a, k) * g.L_r(k, j);
            }
        }
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < n; ++i) {
                CHECK_THAT(d.Phi1_hat_dot(j, i), WithinAbs(-rates.gamma_phi1.diag(i) * in.x_p(i) * w(j), 1e-12));
            }
        }
        for (int k = 0; k < nodes; ++k) {
            const Vector ly = g.L_r * in.y_h_nodes[k];
            for (Index j = 0; j < m; ++j) {
                for (Index i = 0; i < m; ++i) {
                    CHECK_THAT(d.Phi2_hat_dot[k](j, i), WithinAbs(-0.1 * ly(i) * w(j), 1e-12));
                }
            }
        }
    }
}

TEST_CASE("outer adaptation is idle with zero augmented error", "[adaptation]") {
    const auto g = toy_gains();
    pilot::OuterBounds bounds{adaptive::ProjectionBounds::uniform(1, 1, 0.1, 10),
                              adaptive::ProjectionBounds::uniform(1, 1, 0.1, 10),
                              adaptive::ProjectionBounds::uniform(2, 1, -10, 10),
                              adaptive::ProjectionBounds::uniform(1, 1, -10, 10)};
    const auto st = pilot::OuterLoopState::initial(2, 1, 2, Matrix::Zero(1, 2));
    const pilot::OuterDelayedInputs in{vec({1.0}), vec({0.5}), vec({1.0, 1.0}), {vec({1.0}), vec({2.0})}};
    const auto d = pilot::outer_adaptation(Vector::Zero(2), in, st, make_matrix({{1.0}, {1.0}}), g,
                                           pilot::OuterRates{}, bounds);
    CHECK(d.lambda2_hat_dot.isZero(0.0));
    CHECK(d.lambda3_hat_dot.isZero(0.0));
    CHECK(d.Phi1_hat_dot.isZero(0.0));
    for (const auto& p : d.Phi2_hat_dot) CHECK(p.isZero(0.0));
}

TEST_CASE("crossover_derivative", "[crossover]") {
    const auto g = toy_gains();
    const Vector d = pilot::crossover_derivative(vec({1.0, 1.0}), vec({2.0}), g);
    CHECK((d - vec({-0.5 + 2.0, -3.0})).norm() <= 1e-15);
    CHECK_THROWS_AS(pilot::crossover_derivative(vec({1.0}), vec({2.0}), g), DimensionMismatch);
}
