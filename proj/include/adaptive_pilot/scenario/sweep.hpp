#pragma once

// Delay x outer-learning-rate grid runner with boundedness classification.

#include <algorithm>
#include <atomic>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "adaptive_pilot/diagnostics.hpp"
#include "adaptive_pilot/scenario/simulation.hpp"

namespace adaptive_pilot::scenario {

struct SweepRow {
    double tau = 0.0;
    double scale = 1.0;
    bool bounded = false;
    diagnostics::RunMetrics metrics;
    std::string error;  ///< empty when the run completed
};

/// Base config with tau replaced and gamma_2, gamma_phi1, gamma_phi2 multiplied by scale.
inline ScenarioConfig sweep_point(const ScenarioConfig& base, double tau, double scale) {
    ScenarioConfig c = base;
    c.tau = tau;
    c.outer_rates.gamma_2 = base.outer_rates.gamma_2.scaled(scale);
    c.outer_rates.gamma_phi1 = base.outer_rates.gamma_phi1.scaled(scale);
    c.outer_rates.gamma_phi2 = base.outer_rates.gamma_phi2.scaled(scale);
    return c;
}

/// Runs one grid point; never throws for per-run failures.
inline SweepRow run_sweep_point(const ScenarioConfig& base, double tau, double scale) {
    SweepRow row;
    row.tau = tau;
    row.scale = scale;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.metrics = {nan, nan, nan, nan, nan};
    try {
        const ScenarioConfig c = sweep_point(base, tau, scale);
        const RunResult result = simulate(c);
        if (result.failure) {
            row.error = result.failure->what();
            return row;
        }
        row.metrics = diagnostics::compute_metrics(result.log, c);
        row.bounded = row.metrics.peak_e_y <= c.e_y_cap;
        if (!row.bounded) row.error = "peak |e_y| exceeds cap";
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

/// One run per (tau, scale) pair, tau-major order, on `workers` threads.
inline std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const std::vector<double>& taus,
                                       const std::vector<double>& scales, unsigned workers = 0) {
    if (taus.empty() || scales.empty()) throw ValidationError("sweep: tau and scale grids must be non-empty");
    for (double s : scales) {
        if (!(s > 0.0)) throw ValidationError("sweep: scales must be positive");
    }
    for (double t : taus) validate(sweep_point(base, t, 1.0));

    std::vector<SweepRow> rows(taus.size() * scales.size());
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(rows.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            rows[i] = run_sweep_point(base, taus[i / scales.size()], scales[i % scales.size()]);
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    return rows;
}

inline std::vector<SweepRow> run_sweep(const ScenarioConfig& base, unsigned workers = 0) {
    return run_sweep(base, base.sweep_tau, base.sweep_scale, workers);
}

/// Scales whose bounded set is not a prefix of the ascending tau grid.
inline std::vector<double> monotonicity_flags(const std::vector<SweepRow>& rows) {
    std::vector<double> scales;
    for (const auto& r : rows) {
        if (std::find(scales.begin(), scales.end(), r.scale) == scales.end()) scales.push_back(r.scale);
    }
    std::vector<double> flagged;
    for (double s : scales) {
        std::vector<std::pair<double, bool>> column;
        for (const auto& r : rows) {
            if (r.scale == s) column.emplace_back(r.tau, r.bounded);
        }
        std::sort(column.begin(), column.end());
        bool lost = false;
        for (const auto& [tau, bounded] : column) {
            if (!bounded) lost = true;
            else if (lost) {
                flagged.push_back(s);
                break;
            }
        }
    }
    return flagged;
}

/// True when, at the given tau, no larger scale is bounded after a smaller one diverged.
inline bool boundedness_non_improving(const std::vector<SweepRow>& rows, double tau) {
    std::vector<std::pair<double, bool>> line;
    for (const auto& r : rows) {
        if (r.tau == tau) line.emplace_back(r.scale, r.bounded);
    }
    std::sort(line.begin(), line.end());
    bool lost = false;
    for (const auto& [scale, bounded] : line) {
        if (!bounded) lost = true;
        else if (lost) return false;
    }
    return true;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "tau,scale,bounded,rms,duty_cycle,peak_e_y\n";
    std::string line;
    for (const auto& r : rows) {
        line.clear();
        detail::put_number(line, r.tau);
        line += ',';
        detail::put_number(line, r.scale);
        line += r.bounded ? ",1," : ",0,";
        detail::put_number(line, r.metrics.rms_tracking_error);
        line += ',';
        detail::put_number(line, r.metrics.saturation_duty_cycle);
        line += ',';
        detail::put_number(line, r.metrics.peak_e_y);
        line += '\n';
        os << line;
    }
}

}  // namespace adaptive_pilot::scenario
