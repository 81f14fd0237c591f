#pragma once

// Scenario definition, JSON (de)serialization, validation and gain design.
//
// Angles are centiradians internally. Human-facing angle fields carry an
// explicit unit suffix in JSON (`_deg`, `_deg_s`, `_crad`, `_crad_s`);
// 1 deg = pi/1.8 crad.

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adaptive_pilot/inner_loop.hpp"
#include "adaptive_pilot/numerics/linalg.hpp"
#include "adaptive_pilot/pilot_model.hpp"

namespace adaptive_pilot::scenario {

using json = nlohmann::ordered_json;

inline constexpr double kCradPerDeg = std::numbers::pi / 1.8;

enum class AngleUnit { Degrees, Centiradians };

/// An angle (or angular rate) vector as written in the config, with its unit.
struct AngleValue {
    Vector value;
    AngleUnit unit = AngleUnit::Centiradians;

    Vector crad() const { return unit == AngleUnit::Degrees ? Vector(value * kCradPerDeg) : value; }

    friend bool operator==(const AngleValue& a, const AngleValue& b) {
        return a.unit == b.unit && a.value.size() == b.value.size() && a.value == b.value;
    }
};

/// r(t) = level on [start, end); zero outside every segment.
struct ReferenceSegment {
    double start = 0.0;
    double end = 0.0;
    AngleValue level;
};

struct FailureEvent {
    double time = 0.0;
    Vector Lambda;
};

enum class FeedforwardMode { Full, ShortPeriod };

struct Box {
    double lower = 0.0;
    double upper = 0.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    inner::PlantParams plant;

    Matrix A_n;
    std::optional<Matrix> L_x;  ///< absent: A_r = A_n
    FeedforwardMode feedforward = FeedforwardMode::Full;
    Matrix A_sp, B_sp, C_sp;
    Matrix Q_lqr, R_lqr, Q_1, Q_2;

    double tau = 0.3;
    int intervals = 5;
    AngleValue y_o;  ///< saturation per command channel (rate units)

    inner::InnerRates inner_rates;
    double lambda_init = 1.0;
    Box lambda_bounds{0.1, 10.0};
    std::optional<Box> k_x_bounds;  ///< optional safety box on K_hat_x, off by default

    pilot::OuterRates outer_rates;
    double lambda2_init = 1.0;
    double lambda3_init = 1.0;
    std::optional<Matrix> phi1_init;  ///< absent: -theta_x e^{A_r tau}
    Box lambda2_bounds{0.1, 10.0};
    Box lambda3_bounds{0.1, 10.0};
    Box phi1_bounds{-50.0, 50.0};
    Box phi2_bounds{-50.0, 50.0};
    double margin_fraction = 0.01;

    double step = 1e-3;
    double duration = 70.0;
    int csv_stride = 10;

    std::vector<ReferenceSegment> reference;
    std::vector<FailureEvent> events;

    double metrics_start = 35.0;
    double metrics_end = 70.0;
    double e_y_cap = 1e3;
    double signal_cap = 1e6;

    std::vector<double> sweep_tau{0.0, 0.15, 0.3, 0.45, 0.6};
    std::vector<double> sweep_scale{0.2, 1.0, 5.0};

    Index n() const { return plant.n(); }
    Index m() const { return plant.m(); }
};

// ---------------------------------------------------------------------------
// Builtin 747 longitudinal case

inline ScenarioConfig builtin_747() {
    using numerics::make_matrix;
    ScenarioConfig c;
    c.name = "builtin_747";
    // States: u, w (ft/s), pitch rate q (crad/s), pitch angle (crad). Input: elevator (crad).
    c.A_n = make_matrix({{-0.0030, 0.0390, 0.0, -0.3220},
                         {-0.0650, -0.3190, 7.7400, 0.0},
                         {0.0200, -0.1010, -0.4290, 0.0},
                         {0.0, 0.0, 1.0, 0.0}});
    c.plant.A_p = make_matrix({{-0.0029, 0.0389, -0.0047, -0.3220},
                               {-0.0661, -0.3171, 7.8254, 0.0008},
                               {0.0129, -0.0888, 0.1210, 0.0051},
                               {0.0, 0.0, 1.0, 0.0}});
    c.plant.B_p = make_matrix({{0.0100}, {-0.1800}, {-1.1600}, {0.0}});
    c.plant.Lambda = Vector::Ones(1);
    c.plant.C_1 = make_matrix({{0.0}, {0.0}, {1.0}, {0.0}});
    c.plant.C_2 = make_matrix({{0.0}, {0.0}, {0.0}, {1.0}});

    c.feedforward = FeedforwardMode::ShortPeriod;
    c.A_sp = make_matrix({{-0.3190, 7.7400}, {-0.1010, -0.4290}});
    c.B_sp = make_matrix({{-0.1800}, {-1.1600}});
    c.C_sp = make_matrix({{0.0}, {1.0}});
    c.Q_lqr = Vector((Vector(4) << 0.0, 0.0, 0.0, 3.0).finished()).asDiagonal();
    c.R_lqr = Matrix::Constant(1, 1, 3.0);
    c.Q_1 = 0.001 * Matrix::Identity(4, 4);
    c.Q_2 = 0.001 * Matrix::Identity(4, 4);

    c.tau = 0.3;
    c.intervals = 5;
    c.y_o = {Vector::Constant(1, 10.0), AngleUnit::Degrees};

    c.inner_rates.gamma_x = 1.0;
    c.inner_rates.gamma_lambda = 1.0;
    c.outer_rates.gamma_2 = 1.0;
    c.outer_rates.gamma_3 = 5.0;
    c.outer_rates.gamma_phi1 = adaptive::LearningRate(Vector((Vector(4) << 0.01, 0.001, 0.01, 0.01).finished()));
    c.outer_rates.gamma_phi2 = 0.1;

    c.step = 1e-3;
    c.duration = 70.0;
    c.reference = {
        {5.0, 20.0, {Vector::Constant(1, 5.0), AngleUnit::Centiradians}},
        {20.0, 35.0, {Vector::Constant(1, -5.0), AngleUnit::Centiradians}},
        {35.0, 50.0, {Vector::Constant(1, 5.0), AngleUnit::Centiradians}},
    };
    c.events = {{35.0, Vector::Constant(1, 0.6)}};
    c.metrics_start = 35.0;
    c.metrics_end = 70.0;
    return c;
}

// ---------------------------------------------------------------------------
// Reference signal

inline Vector reference_at(const ScenarioConfig& c, double t) {
    Vector r = Vector::Zero(c.m());
    for (const auto& seg : c.reference) {
        if (t >= seg.start && t < seg.end) r = seg.level.crad();
    }
    return r;
}

// ---------------------------------------------------------------------------
// Validation

inline bool grid_divides(double whole, double step) {
    const double ratio = whole / step;
    return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

inline void validate(const ScenarioConfig& c) {
    auto fail = [](const std::string& what) { throw ValidationError(what); };
    c.plant.validate();
    const Index n = c.n(), m = c.m();
    numerics::require_shape(c.A_n, n, n, "design.A_n");
    if (c.L_x) numerics::require_shape(*c.L_x, m, n, "design.L_x");
    if (c.feedforward == FeedforwardMode::ShortPeriod) {
        numerics::require_square(c.A_sp, "design.feedforward.A_sp");
        numerics::require_shape(c.B_sp, c.A_sp.rows(), m, "design.feedforward.B_sp");
        numerics::require_shape(c.C_sp, c.A_sp.rows(), m, "design.feedforward.C_sp");
    }
    numerics::require_shape(c.Q_lqr, n, n, "design.Q_lqr");
    numerics::require_shape(c.R_lqr, m, m, "design.R_lqr");
    numerics::require_shape(c.Q_1, n, n, "design.Q_1");
    numerics::require_shape(c.Q_2, n, n, "design.Q_2");
    for (const Matrix* q : {&c.Q_1, &c.Q_2}) {
        if (!numerics::is_symmetric(*q, 1e-12) || !numerics::is_positive_definite(*q)) {
            fail("design: Q_1 and Q_2 must be symmetric positive definite");
        }
    }
    if (!(c.tau >= 0.0) || !std::isfinite(c.tau)) fail("pilot.tau must be >= 0");
    if (c.intervals < 1) fail("pilot.intervals must be >= 1");
    numerics::require_size(c.y_o.value, m, "pilot.y_o");
    if (!(c.y_o.value.array() > 0.0).all()) fail("pilot.y_o must be positive");
    if (!(c.step > 0.0)) fail("simulation.step must be > 0");
    if (!(c.duration > 0.0)) fail("simulation.duration must be > 0");
    if (c.csv_stride < 1) fail("simulation.csv_stride must be >= 1");
    if (c.tau > 0.0) {
        const double node_spacing = c.tau / c.intervals;
        if (c.step > node_spacing * (1.0 + 1e-9) || !grid_divides(node_spacing, c.step)) {
            fail("simulation.step must divide the delay node spacing tau/N exactly (grid alignment)");
        }
    }
    c.inner_rates.gamma_x.validate(n, "inner.gamma_x");
    c.inner_rates.gamma_lambda.validate(m, "inner.gamma_lambda");
    c.outer_rates.gamma_2.validate(m, "outer.gamma_2");
    c.outer_rates.gamma_3.validate(m, "outer.gamma_3");
    c.outer_rates.gamma_phi1.validate(n, "outer.gamma_phi1");
    c.outer_rates.gamma_phi2.validate(m, "outer.gamma_phi2");
    for (const Box* b : {&c.lambda_bounds, &c.lambda2_bounds, &c.lambda3_bounds}) {
        if (!(b->lower > 0.0 && b->lower < b->upper)) {
            fail("lambda bounds must satisfy 0 < lower < upper");
        }
    }
    for (const Box* b : {&c.phi1_bounds, &c.phi2_bounds}) {
        if (!(b->lower < b->upper)) fail("phi bounds must satisfy lower < upper");
    }
    if (c.k_x_bounds && !(c.k_x_bounds->lower < c.k_x_bounds->upper)) {
        fail("inner.k_x_bounds must satisfy lower < upper");
    }
    if (!(c.margin_fraction > 0.0 && c.margin_fraction <= 0.5)) {
        fail("projection.margin_fraction must lie in (0, 0.5]");
    }
    auto inside = [](double x, const Box& b) { return x >= b.lower && x <= b.upper; };
    if (!inside(c.lambda_init, c.lambda_bounds)) fail("inner.lambda_init outside lambda_bounds");
    if (!inside(c.lambda2_init, c.lambda2_bounds)) fail("outer.lambda2_init outside bounds");
    if (!inside(c.lambda3_init, c.lambda3_bounds)) fail("outer.lambda3_init outside bounds");
    if (c.phi1_init) {
        numerics::require_shape(*c.phi1_init, m, n, "outer.phi1_init");
        if ((c.phi1_init->array() < c.phi1_bounds.lower).any() ||
            (c.phi1_init->array() > c.phi1_bounds.upper).any()) {
            fail("outer.phi1_init outside phi1_bounds");
        }
    }
    for (const auto& seg : c.reference) {
        numerics::require_size(seg.level.value, m, "reference.segments.level");
        if (!(seg.end > seg.start)) fail("reference segment must have end > start");
    }
    for (const auto& ev : c.events) {
        numerics::require_size(ev.Lambda, m, "events.Lambda");
        if (!(ev.time >= 0.0 && ev.time <= c.duration)) fail("event time outside [0, duration]");
        if (!((ev.Lambda.array() > 0.0).all() && (ev.Lambda.array() <= 1.0).all())) {
            fail("events.Lambda entries must lie in (0, 1]");
        }
    }
    if (!(c.metrics_end > c.metrics_start)) fail("metrics.window must have end > start");
    if (!(c.e_y_cap > 0.0) || !(c.signal_cap > 0.0)) fail("caps must be positive");
}

// ---------------------------------------------------------------------------
// Gain design

/// Runs the full offline design: A_r, L_r, LQR crossover, theta_r, Lyapunov matrices.
inline adaptive::GainSet build_gains(const ScenarioConfig& c) {
    adaptive::GainSet g;
    const Matrix& b_p = c.plant.B_p;
    g.L_x = c.L_x ? *c.L_x : Matrix::Zero(c.m(), c.n());
    g.A_r = c.A_n - b_p * g.L_x;
    if (!numerics::is_hurwitz(g.A_r)) throw NotHurwitz("design: A_r = A_n - B_p L_x is not Hurwitz");
    g.L_r = c.feedforward == FeedforwardMode::ShortPeriod
                ? adaptive::compute_Lr(c.A_sp, c.B_sp, c.C_sp)
                : adaptive::compute_Lr(g.A_r, b_p, c.plant.C_1);
    g.B_r = b_p * g.L_r;
    auto cross = adaptive::design_crossover(g.A_r, b_p, g.L_r, c.Q_lqr, c.R_lqr);
    g.theta_x = cross.theta_x;
    g.A_m = cross.A_m;
    g.theta_r = adaptive::compute_theta_r(g.A_m, g.B_r, c.plant.C_2);
    g.B_m = g.B_r * g.theta_r;
    g.P_1 = numerics::solve_lyapunov(g.A_r, c.Q_1);
    g.P_2 = numerics::solve_lyapunov(g.A_m, c.Q_2);
    return g;
}

inline Matrix phi1_initial(const ScenarioConfig& c, const adaptive::GainSet& g) {
    if (c.phi1_init) return *c.phi1_init;
    return -g.theta_x * numerics::matrix_exponential(g.A_r, c.tau);
}

inline adaptive::ProjectionBounds make_bounds(Index rows, Index cols, const Box& b, double frac) {
    return adaptive::ProjectionBounds::uniform(rows, cols, b.lower, b.upper, frac);
}

/// Effectiveness in force on the step [t, t + step): every event with
/// time < t + step has fired, so an event takes effect on the step containing it.
inline Vector lambda_at(const ScenarioConfig& c, double t) {
    Vector lam = c.plant.Lambda;
    double last = -1.0;
    for (const auto& ev : c.events) {
        if (ev.time < t + c.step * (1.0 - 1e-6) && ev.time >= last) {
            lam = ev.Lambda;
            last = ev.time;
        }
    }
    return lam;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json rate_to_json(const adaptive::LearningRate& r) {
    return r.is_scalar() ? json(r.diag(0)) : vector_to_json(r.diag);
}

inline json box_to_json(const Box& b) { return json::array({b.lower, b.upper}); }

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    /// Rejects keys not in `allowed`.
    void allow(std::initializer_list<const char*> allowed) const {
        for (const auto& [key, _] : j_.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) throw ParseError(field(key), "unknown key");
        }
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& at(const char* key) const {
        if (!j_.contains(key)) throw ParseError(field(key), "missing required key");
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const char* key) const { return to_number(at(key), field(key)); }

    double number_or(const char* key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    Reader object(const char* key) const { return Reader(at(key), field(key)); }

    Matrix matrix(const char* key) const { return to_matrix(at(key), field(key)); }

    Vector vector(const char* key) const { return to_vector(at(key), field(key)); }

    static double to_number(const json& v, const std::string& where) {
        if (!v.is_number()) throw ParseError(where, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ParseError(where, "non-finite number");
        return x;
    }

    static Vector to_vector(const json& v, const std::string& where) {
        if (v.is_number()) return Vector::Constant(1, to_number(v, where));
        if (!v.is_array()) throw ParseError(where, "expected a number or array");
        Vector out(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            out(static_cast<Index>(i)) = to_number(v[i], where + "[" + std::to_string(i) + "]");
        }
        return out;
    }

    /// Row-major nested arrays; a flat array is read as a column.
    static Matrix to_matrix(const json& v, const std::string& where) {
        if (!v.is_array() || v.empty()) throw ParseError(where, "expected a non-empty array");
        if (!v[0].is_array()) return to_vector(v, where);
        const auto rows = v.size(), cols = v[0].size();
        Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            if (!v[i].is_array() || v[i].size() != cols) throw ParseError(where, "ragged matrix");
            for (std::size_t j = 0; j < cols; ++j) {
                out(static_cast<Index>(i), static_cast<Index>(j)) =
                    to_number(v[i][j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
            }
        }
        return out;
    }

    adaptive::LearningRate rate(const char* key) const {
        return adaptive::LearningRate(to_vector(at(key), field(key)));
    }

    Box box(const char* key) const {
        const Vector v = vector(key);
        if (v.size() != 2) throw ParseError(field(key), "expected [lower, upper]");
        return {v(0), v(1)};
    }

    /// Reads `<stem>_deg<suffix>` or `<stem>_crad<suffix>`; exactly one must be present.
    AngleValue angle(const std::string& stem, const std::string& suffix) const {
        const std::string deg = stem + "_deg" + suffix, crad = stem + "_crad" + suffix;
        const bool has_deg = j_.contains(deg), has_crad = j_.contains(crad);
        if (has_deg == has_crad) {
            throw ParseError(field(stem), "give exactly one of " + deg + " or " + crad);
        }
        const std::string& key = has_deg ? deg : crad;
        return {to_vector(j_.at(key), field(key)),
                has_deg ? AngleUnit::Degrees : AngleUnit::Centiradians};
    }

private:
    const json& j_;
    std::string path_;
};

inline void angle_to_json(json& obj, const std::string& stem, const std::string& suffix,
                          const AngleValue& a) {
    obj[stem + (a.unit == AngleUnit::Degrees ? "_deg" : "_crad") + suffix] = vector_to_json(a.value);
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
    using namespace detail;
    json j;
    j["name"] = c.name;
    j["plant"] = {{"A_p", matrix_to_json(c.plant.A_p)},
                  {"B_p", matrix_to_json(c.plant.B_p)},
                  {"C_1", matrix_to_json(c.plant.C_1)},
                  {"C_2", matrix_to_json(c.plant.C_2)},
                  {"Lambda", vector_to_json(c.plant.Lambda)}};
    json ff;
    if (c.feedforward == FeedforwardMode::ShortPeriod) {
        ff = {{"mode", "short_period"},
              {"A_sp", matrix_to_json(c.A_sp)},
              {"B_sp", matrix_to_json(c.B_sp)},
              {"C_sp", matrix_to_json(c.C_sp)}};
    } else {
        ff = {{"mode", "full"}};
    }
    j["design"] = {{"A_n", matrix_to_json(c.A_n)},
                   {"L_x", c.L_x ? matrix_to_json(*c.L_x) : json(nullptr)},
                   {"feedforward", ff},
                   {"Q_lqr", matrix_to_json(c.Q_lqr)},
                   {"R_lqr", matrix_to_json(c.R_lqr)},
                   {"Q_1", matrix_to_json(c.Q_1)},
                   {"Q_2", matrix_to_json(c.Q_2)}};
    json pilot = {{"tau", c.tau}, {"intervals", c.intervals}};
    angle_to_json(pilot, "y_o", "_s", c.y_o);
    j["pilot"] = pilot;
    j["inner"] = {{"gamma_x", rate_to_json(c.inner_rates.gamma_x)},
                  {"gamma_lambda", rate_to_json(c.inner_rates.gamma_lambda)},
                  {"lambda_init", c.lambda_init},
                  {"lambda_bounds", box_to_json(c.lambda_bounds)},
                  {"k_x_bounds", c.k_x_bounds ? box_to_json(*c.k_x_bounds) : json(nullptr)}};
    j["outer"] = {{"gamma_2", rate_to_json(c.outer_rates.gamma_2)},
                  {"gamma_3", rate_to_json(c.outer_rates.gamma_3)},
                  {"gamma_phi1", rate_to_json(c.outer_rates.gamma_phi1)},
                  {"gamma_phi2", rate_to_json(c.outer_rates.gamma_phi2)},
                  {"lambda2_init", c.lambda2_init},
                  {"lambda3_init", c.lambda3_init},
                  {"phi1_init", c.phi1_init ? matrix_to_json(*c.phi1_init) : json("auto")},
                  {"lambda2_bounds", box_to_json(c.lambda2_bounds)},
                  {"lambda3_bounds", box_to_json(c.lambda3_bounds)},
                  {"phi1_bounds", box_to_json(c.phi1_bounds)},
                  {"phi2_bounds", box_to_json(c.phi2_bounds)}};
    j["projection"] = {{"margin_fraction", c.margin_fraction}};
    j["simulation"] = {{"step", c.step}, {"duration", c.duration}, {"csv_stride", c.csv_stride}};
    json segs = json::array();
    for (const auto& s : c.reference) {
        json seg = {{"start", s.start}, {"end", s.end}};
        angle_to_json(seg, "level", "", s.level);
        segs.push_back(seg);
    }
    j["reference"] = {{"segments", segs}};
    json events = json::array();
    for (const auto& e : c.events) events.push_back({{"time", e.time}, {"Lambda", vector_to_json(e.Lambda)}});
    j["events"] = events;
    j["metrics"] = {{"window", json::array({c.metrics_start, c.metrics_end})}};
    j["caps"] = {{"e_y", c.e_y_cap}, {"signals", c.signal_cap}};
    j["sweep"] = {{"tau", c.sweep_tau}, {"scale", c.sweep_scale}};
    return j;
}

/// Parses a JSON document into a validated config. Unknown keys are rejected.
inline ScenarioConfig from_json(const json& root) {
    using detail::Reader;
    ScenarioConfig c;
    Reader top(root, "");
    top.allow({"name", "plant", "design", "pilot", "inner", "outer", "projection", "simulation",
               "reference", "events", "metrics", "caps", "sweep"});
    if (top.has("name")) {
        if (!root.at("name").is_string()) throw ParseError("name", "expected a string");
        c.name = root.at("name").get<std::string>();
    }

    auto plant = top.object("plant");
    plant.allow({"A_p", "B_p", "C_1", "C_2", "Lambda"});
    c.plant.A_p = plant.matrix("A_p");
    c.plant.B_p = plant.matrix("B_p");
    c.plant.C_1 = plant.matrix("C_1");
    c.plant.C_2 = plant.matrix("C_2");
    c.plant.Lambda = plant.vector("Lambda");

    auto design = top.object("design");
    design.allow({"A_n", "L_x", "feedforward", "Q_lqr", "R_lqr", "Q_1", "Q_2"});
    c.A_n = design.matrix("A_n");
    if (design.has("L_x")) c.L_x = design.matrix("L_x");
    auto ff = design.object("feedforward");
    const json& mode = ff.at("mode");
    if (mode == "short_period") {
        ff.allow({"mode", "A_sp", "B_sp", "C_sp"});
        c.feedforward = FeedforwardMode::ShortPeriod;
        c.A_sp = ff.matrix("A_sp");
        c.B_sp = ff.matrix("B_sp");
        c.C_sp = ff.matrix("C_sp");
    } else if (mode == "full") {
        ff.allow({"mode"});
        c.feedforward = FeedforwardMode::Full;
    } else {
        throw ParseError("design.feedforward.mode", "expected \"full\" or \"short_period\"");
    }
    c.Q_lqr = design.matrix("Q_lqr");
    c.R_lqr = design.matrix("R_lqr");
    c.Q_1 = design.matrix("Q_1");
    c.Q_2 = design.matrix("Q_2");

    auto pilot = top.object("pilot");
    pilot.allow({"tau", "intervals", "y_o_deg_s", "y_o_crad_s"});
    c.tau = pilot.number("tau");
    const double intervals = pilot.number("intervals");
    if (intervals != std::floor(intervals)) throw ParseError("pilot.intervals", "expected an integer");
    c.intervals = static_cast<int>(intervals);
    c.y_o = pilot.angle("y_o", "_s");

    auto in = top.object("inner");
    in.allow({"gamma_x", "gamma_lambda", "lambda_init", "lambda_bounds", "k_x_bounds"});
    c.inner_rates.gamma_x = in.rate("gamma_x");
    c.inner_rates.gamma_lambda = in.rate("gamma_lambda");
    c.lambda_init = in.number_or("lambda_init", c.lambda_init);
    if (in.has("lambda_bounds")) c.lambda_bounds = in.box("lambda_bounds");
    if (in.has("k_x_bounds")) c.k_x_bounds = in.box("k_x_bounds");

    auto out = top.object("outer");
    out.allow({"gamma_2", "gamma_3", "gamma_phi1", "gamma_phi2", "lambda2_init", "lambda3_init",
               "phi1_init", "lambda2_bounds", "lambda3_bounds", "phi1_bounds", "phi2_bounds"});
    c.outer_rates.gamma_2 = out.rate("gamma_2");
    c.outer_rates.gamma_3 = out.rate("gamma_3");
    c.outer_rates.gamma_phi1 = out.rate("gamma_phi1");
    c.outer_rates.gamma_phi2 = out.rate("gamma_phi2");
    c.lambda2_init = out.number_or("lambda2_init", c.lambda2_init);
    c.lambda3_init = out.number_or("lambda3_init", c.lambda3_init);
    if (out.has("phi1_init")) {
        const json& p = out.at("phi1_init");
        if (p.is_string()) {
            if (p != "auto") throw ParseError("outer.phi1_init", "expected \"auto\" or a matrix");
        } else {
            c.phi1_init = out.matrix("phi1_init");
        }
    }
    if (out.has("lambda2_bounds")) c.lambda2_bounds = out.box("lambda2_bounds");
    if (out.has("lambda3_bounds")) c.lambda3_bounds = out.box("lambda3_bounds");
    if (out.has("phi1_bounds")) c.phi1_bounds = out.box("phi1_bounds");
    if (out.has("phi2_bounds")) c.phi2_bounds = out.box("phi2_bounds");

    if (top.has("projection")) {
        auto pr = top.object("projection");
        pr.allow({"margin_fraction"});
        c.margin_fraction = pr.number_or("margin_fraction", c.margin_fraction);
    }

    auto sim = top.object("simulation");
    sim.allow({"step", "duration", "csv_stride"});
    c.step = sim.number("step");
    c.duration = sim.number("duration");
    c.csv_stride = static_cast<int>(sim.number_or("csv_stride", c.csv_stride));

    if (top.has("reference")) {
        auto ref = top.object("reference");
        ref.allow({"segments"});
        const json& segs = ref.at("segments");
        if (!segs.is_array()) throw ParseError("reference.segments", "expected an array");
        for (std::size_t i = 0; i < segs.size(); ++i) {
            Reader s(segs[i], "reference.segments[" + std::to_string(i) + "]");
            s.allow({"start", "end", "level_deg", "level_crad"});
            c.reference.push_back({s.number("start"), s.number("end"), s.angle("level", "")});
        }
    }

    if (top.has("events")) {
        const json& evs = root.at("events");
        if (!evs.is_array()) throw ParseError("events", "expected an array");
        for (std::size_t i = 0; i < evs.size(); ++i) {
            Reader e(evs[i], "events[" + std::to_string(i) + "]");
            e.allow({"time", "Lambda"});
            c.events.push_back({e.number("time"), e.vector("Lambda")});
        }
    }

    if (top.has("metrics")) {
        auto mt = top.object("metrics");
        mt.allow({"window"});
        const Vector w = mt.vector("window");
        if (w.size() != 2) throw ParseError("metrics.window", "expected [start, end]");
        c.metrics_start = w(0);
        c.metrics_end = w(1);
    }
    if (top.has("caps")) {
        auto caps = top.object("caps");
        caps.allow({"e_y", "signals"});
        c.e_y_cap = caps.number_or("e_y", c.e_y_cap);
        c.signal_cap = caps.number_or("signals", c.signal_cap);
    }
    if (top.has("sweep")) {
        auto sw = top.object("sweep");
        sw.allow({"tau", "scale"});
        auto to_std = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
        if (sw.has("tau")) c.sweep_tau = to_std(sw.vector("tau"));
        if (sw.has("scale")) c.sweep_scale = to_std(sw.vector("scale"));
    }

    validate(c);
    return c;
}

inline json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line number.
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i) {
            line += text[i] == '\n';
        }
        throw ParseError("line " + std::to_string(line), e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str());
}

inline ScenarioConfig load_config(const std::string& path) { return from_json(read_json_file(path)); }

/// Applies `key=value` overrides in order (last wins). Keys are dotted paths
/// into the JSON document (array elements by index); every key must already
/// exist. Values are parsed as JSON, falling back to a plain string.
inline void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("override '" + ov + "' is not of the form key=value");
        }
        const std::string key = ov.substr(0, eq), text = ov.substr(eq + 1);
        json* node = &doc;
        std::stringstream path(key);
        std::string part;
        while (std::getline(path, part, '.')) {
            if (node->is_object() && node->contains(part)) {
                node = &(*node)[part];
            } else if (node->is_array() && !part.empty() &&
                       part.find_first_not_of("0123456789") == std::string::npos &&
                       std::stoul(part) < node->size()) {
                node = &(*node)[std::stoul(part)];
            } else {
                throw ValidationError("override key '" + key + "' does not name an existing field");
            }
        }
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        *node = std::move(value);
    }
}

/// Equality of the serialized form; used for round-trip checks and hashing.
inline bool same_config(const ScenarioConfig& a, const ScenarioConfig& b) {
    return to_json(a) == to_json(b);
}

/// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const ScenarioConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace adaptive_pilot::scenario
