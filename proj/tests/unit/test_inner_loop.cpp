#include <catch_amalgamated.hpp>

#include <random>

#include "adaptive_pilot/inner_loop.hpp"
#include "adaptive_pilot/scenario/simulation.hpp"

using namespace adaptive_pilot;
using numerics::make_matrix;
using Catch::Matchers::WithinAbs;

TEST_CASE("plant_derivative on the 747 plant", "[plant]") {
    auto p = scenario::builtin_747().plant;
    const Vector ones = Vector::Ones(4);
    CHECK((inner::plant_derivative(ones, Vector::Zero(1), p) - p.A_p.rowwise().sum()).norm() <= 1e-15);
    for (Index k = 0; k < 4; ++k) {
        CHECK(inner::plant_derivative(Vector::Unit(4, k), Vector::Zero(1), p) == p.A_p.col(k));
    }
    p.Lambda(0) = 0.6;
    const Vector d = inner::plant_derivative(Vector::Zero(4), Vector::Constant(1, 2.0), p);
    CHECK((d - 1.2 * p.B_p.col(0)).norm() <= 1e-15);
    CHECK_THROWS_AS(inner::plant_derivative(Vector::Zero(3), Vector::Zero(1), p), DimensionMismatch);
}

TEST_CASE("outputs select pitch rate and pitch angle", "[plant]") {
    const auto p = scenario::builtin_747().plant;
    const Vector x = (Vector(4) << 1.0, 2.0, 3.0, 4.0).finished();
    CHECK(inner::output_y1(x, p)(0) == 3.0);
    CHECK(inner::output_y2(x, p)(0) == 4.0);
}

TEST_CASE("PlantParams validation", "[plant]") {
    auto p = scenario::builtin_747().plant;
    CHECK_NOTHROW(p.validate());
    SECTION("effectiveness outside (0, 1]") {
        p.Lambda(0) = 0.0;
        CHECK_THROWS_AS(p.validate(), ValidationError);
        p.Lambda(0) = 1.2;
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("uncontrollable pair") {
        p.A_p = -Matrix::Identity(4, 4);
        CHECK_THROWS_AS(p.validate(), ValidationError);
    }
    SECTION("shape mismatch") {
        p.C_1 = Matrix::Zero(3, 1);
        CHECK_THROWS_AS(p.validate(), DimensionMismatch);
    }
}

TEST_CASE("short-period feed-forward has unit DC gain", "[design]") {
    const auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const double dc = (-c.C_sp.transpose() * c.A_sp.inverse() * c.B_sp * g.L_r)(0, 0);
    CHECK_THAT(dc, WithinAbs(1.0, 1e-12));
}

TEST_CASE("reference model settles with zero pitch rate", "[design]") {
    const auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const Vector x_ss = -g.A_r.fullPivLu().solve(g.B_r * Vector::Ones(1));
    CHECK(std::abs(inner::output_y1(x_ss, c.plant)(0)) <= 1e-12 * x_ss.norm());
    CHECK(inner::reference_derivative(x_ss, Vector::Ones(1), g).norm() <= 1e-12 * x_ss.norm());
}

TEST_CASE("ideal gain reproduces the reference dynamics", "[control]") {
    auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const Matrix k_star = make_matrix({{0.02, -0.01, 0.4, 0.1}});
    c.plant.A_p = g.A_r + c.plant.B_p * k_star;
    std::mt19937 rng(9);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        Vector x(4);
        for (Index i = 0; i < 4; ++i) x(i) = nd(rng);
        const Vector y_h = Vector::Constant(1, nd(rng));
        const Vector u = inner::inner_control(x, k_star, Vector::Ones(1), y_h, g);
        const Vector plant = inner::plant_derivative(x, u, c.plant);
        CHECK((plant - inner::reference_derivative(x, y_h, g)).norm() <= 1e-13 * (1.0 + plant.norm()));
    }
}

TEST_CASE("inner adaptation matches an element-wise oracle", "[adaptation]") {
    std::mt19937 rng(17);
    std::normal_distribution<double> nd;
    const Index n = 3, m = 2;
    auto rnd = [&](Index r, Index cc) {
        Matrix x(r, cc);
        for (Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
        return x;
    };
    const auto bounds = adaptive::ProjectionBounds::uniform(m, 1, 0.1, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector x_p = rnd(n, 1), e_1 = rnd(n, 1), y_h = rnd(m, 1);
        const Matrix b_p = rnd(n, m), l_r = rnd(m, m);
        const Matrix s = rnd(n, n);
        const Matrix p_1 = s * s.transpose() + Matrix::Identity(n, n);
        const Vector lam = Vector::Constant(m, 5.0);
        inner::InnerRates rates;
        rates.gamma_x = adaptive::LearningRate(Vector((Vector(n) << 1.0, 2.0, 3.0).finished()));
        rates.gamma_lambda = 0.5;
        const auto d = inner::inner_adaptation(x_p, lam, e_1, y_h, b_p, l_r, p_1, rates, bounds);
        for (Index j = 0; j < m; ++j) {
            double pbe = 0.0;
            for (Index a = 0; a < n; ++a) {
                for (Index bb = 0; bb < n; ++bb) pbe += b_p(a, j) * p_1(a, bb) * e_1(bb);
            }
            for (Index i = 0; i < n; ++i) {
                CHECK_THAT(d.K_hat_x_dot(j, i), WithinAbs(rates.gamma_x.diag(i) * x_p(i) * pbe, 1e-12));
            }
            double lry = 0.0;
            for (Index k = 0; k < m; ++k) lry += l_r(j, k) * y_h(k);
            CHECK_THAT(d.lambda_hat_dot(j), WithinAbs(-0.5 * lry * pbe, 1e-12));
        }
    }
}

TEST_CASE("inner adaptation is idle with zero error", "[adaptation]") {
    const auto c = scenario::builtin_747();
    const auto g = scenario::build_gains(c);
    const auto bounds = adaptive::ProjectionBounds::uniform(1, 1, 0.1, 2.0);
    const auto d = inner::inner_adaptation(Vector::Ones(4), Vector::Ones(1), Vector::Zero(4), Vector::Ones(1),
                                           c.plant.B_p, g.L_r, g.P_1, c.inner_rates, bounds);
    CHECK(d.K_hat_x_dot.isZero(0.0));
    CHECK(d.lambda_hat_dot.isZero(0.0));
}

TEST_CASE("matched plant keeps the tracking error at zero", "[simulation]") {
    auto c = scenario::builtin_747();
    c.plant.A_p = c.A_n;
    c.events.clear();
    const auto log = scenario::simulate_inner_loop(c, Vector::Ones(1), 10.0);
    CHECK(log.e_1_norm.maxCoeff() <= 1e-12);
    CHECK(log.K_hat_x.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(log.x_p.cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("inner loop drives the tracking error down under uncertainty", "[simulation]") {
    auto c = scenario::builtin_747();
    const auto log = scenario::simulate_inner_loop(c, Vector::Ones(1), 30.0);
    const Index last = log.t.size() - 1;
    CHECK(log.e_1_norm(last) < log.e_1_norm.maxCoeff());
    CHECK((log.lambda_hat.array() >= c.lambda_bounds.lower).all());
    CHECK((log.lambda_hat.array() <= c.lambda_bounds.upper).all());
}
