// adaptive_sim: run, sweep and verify the two-loop adaptive pilot simulation.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 run diverged
// (non-finite state or |e_y| above the configured cap), 3 verification failure.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adaptive_pilot/diagnostics.hpp"
#include "adaptive_pilot/scenario/simulation.hpp"
#include "adaptive_pilot/scenario/sweep.hpp"
#include "adaptive_pilot/verification.hpp"

namespace fs = std::filesystem;
using namespace adaptive_pilot;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
    std::string scenario_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    unsigned workers = 0;
    std::vector<std::string> only;
};

scenario::json config_document(const Options& o) {
    scenario::json doc = o.scenario_path.empty() ? scenario::to_json(scenario::builtin_747())
                                                 : scenario::read_json_file(o.scenario_path);
    scenario::apply_overrides(doc, o.overrides);
    return doc;
}

scenario::ScenarioConfig load(const Options& o) { return scenario::from_json(config_document(o)); }

fs::path output_dir(const Options& o) {
    fs::path dir = o.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("ADAPTIVE_SIM_OUT");
        dir = env && *env ? env : "out";
    }
    fs::create_directories(dir);
    return dir;
}

void write_metrics_csv(std::ostream& os, const diagnostics::RunMetrics& m) {
    std::string line = "rms_tracking_error,saturation_duty_cycle,control_effort,pilot_effort,peak_e_y\n";
    for (double v : {m.rms_tracking_error, m.saturation_duty_cycle, m.control_effort, m.pilot_effort, m.peak_e_y}) {
        scenario::detail::put_number(line, v);
        line += ',';
    }
    line.back() = '\n';
    os << line;
}

/// Indented JSON with arrays of scalars kept on one line, so matrices read row by row.
void write_json(std::ostream& os, const scenario::json& j, int indent = 0) {
    const std::string pad(indent + 2, ' '), close(indent, ' ');
    if (j.is_object() && !j.empty()) {
        os << "{\n";
        std::size_t i = 0;
        for (const auto& [key, value] : j.items()) {
            os << pad << scenario::json(key).dump() << ": ";
            write_json(os, value, indent + 2);
            os << (++i < j.size() ? ",\n" : "\n");
        }
        os << close << '}';
    } else if (j.is_array() && !j.empty() &&
               std::any_of(j.begin(), j.end(), [](const auto& e) { return e.is_structured(); })) {
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            os << pad;
            write_json(os, j[i], indent + 2);
            os << (i + 1 < j.size() ? ",\n" : "\n");
        }
        os << close << ']';
    } else {
        os << j.dump();
    }
}

int cmd_run(const Options& o) {
    const auto config = load(o);
    const fs::path dir = output_dir(o);
    std::cout << "running '" << config.name << "' for " << config.duration << " s (step " << config.step
              << ", tau " << config.tau << ")\n";
    const auto result = scenario::simulate(config);
    const auto& log = result.log;

    diagnostics::RunMetrics metrics;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    metrics = {nan, nan, nan, nan, nan};
    try {
        metrics = diagnostics::compute_metrics(log, config);
    } catch (const EmptyWindow& e) {
        std::cerr << "metrics unavailable: " << e.what() << "\n";
    }
    const bool bounded = !result.failure && metrics.peak_e_y <= config.e_y_cap;

    scenario::write_file_atomic(dir / "run.csv", [&](std::ostream& os) { scenario::write_csv(os, log, config.csv_stride); });
    scenario::write_file_atomic(dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, metrics); });
    scenario::json manifest = {
        {"tool", "adaptive_sim"},
        {"version", kVersion},
        {"scenario", config.name},
        {"config_hash", scenario::config_hash(config)},
        {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
        {"samples", log.count},
        {"end_time", log.end_time()},
        {"bounded", bounded},
        {"error", result.failure ? scenario::json(result.failure->what()) : scenario::json(nullptr)},
        {"config", scenario::to_json(config)},
    };
    scenario::write_file_atomic(dir / "manifest.json", [&](std::ostream& os) {
        write_json(os, manifest);
        os << '\n';
    });

    if (result.failure) {
        std::cerr << "diverged: " << result.failure->what() << "\n";
        return 2;
    }
    std::printf("rms %.6g  duty %.6g  control effort %.6g  pilot effort %.6g  peak |e_y| %.6g\n",
                metrics.rms_tracking_error, metrics.saturation_duty_cycle, metrics.control_effort,
                metrics.pilot_effort, metrics.peak_e_y);
    std::cout << "wrote " << (dir / "run.csv").string() << "\n";
    if (!bounded) {
        std::cerr << "peak |e_y| " << metrics.peak_e_y << " exceeds cap " << config.e_y_cap << "\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto config = load(o);
    const fs::path dir = output_dir(o);
    std::cout << "sweeping " << config.sweep_tau.size() << " delays x " << config.sweep_scale.size() << " scales\n";
    const auto rows = scenario::run_sweep(config, o.workers);
    for (const auto& r : rows) {
        std::printf("tau %-5g scale %-5g %s", r.tau, r.scale, r.bounded ? "bounded " : "diverged");
        if (!r.error.empty()) std::fprintf(stderr, "tau %g scale %g: %s\n", r.tau, r.scale, r.error.c_str());
        std::printf("  rms %.6g  duty %.6g  peak |e_y| %.6g\n", r.metrics.rms_tracking_error,
                    r.metrics.saturation_duty_cycle, r.metrics.peak_e_y);
    }
    for (double s : scenario::monotonicity_flags(rows)) {
        std::cout << "flag: bounded region at scale " << s << " is not a prefix of the tau grid\n";
    }
    scenario::write_file_atomic(dir / "sweep.csv", [&](std::ostream& os) { scenario::write_sweep_csv(os, rows); });
    std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
    return 0;
}

int cmd_verify(const Options& o) {
    const auto config = load(o);
    const auto& all = verification::criteria();
    for (const auto& name : o.only) {
        if (std::none_of(all.begin(), all.end(), [&](const auto& c) { return c.key == name; })) {
            std::cerr << "unknown check '" << name << "'\n";
            return 1;
        }
    }
    bool ok = true;
    for (const auto& crit : all) {
        if (!o.only.empty() && std::find(o.only.begin(), o.only.end(), crit.key) == o.only.end()) continue;
        const auto lines = verification::run_criterion(crit, config);
        bool passed = true;
        for (const auto& l : lines) passed = passed && l.passed;
        std::printf("%s  %-12s %s\n", passed ? "PASS" : "FAIL", crit.key.c_str(), crit.title.c_str());
        for (const auto& l : lines) {
            std::printf("      %s %s: %s\n", l.passed ? "ok  " : "FAIL", l.name.c_str(), l.detail.c_str());
        }
        ok = ok && passed;
    }
    return ok ? 0 : 3;
}

int cmd_emit_config(const Options& o) {
    const auto doc = config_document(o);
    scenario::from_json(doc);  // validate before printing
    if (o.out_dir.empty()) {
        write_json(std::cout, doc);
        std::cout << '\n';
    } else {
        const fs::path dir = output_dir(o);
        scenario::write_file_atomic(dir / "scenario.json", [&](std::ostream& os) {
            write_json(os, doc);
            os << '\n';
        });
        std::cout << "wrote " << (dir / "scenario.json").string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-loop adaptive flight control with an adaptive, delayed human-pilot model"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario_path, "Scenario JSON (default: builtin 747 case)");
        sub->add_option("--override", o.overrides, "Dotted key=value overrides, applied in order (last wins)")
            ->take_all();
    };
    auto* run = app.add_subcommand("run", "Simulate one scenario and write run.csv, metrics.csv, manifest.json");
    add_common(run);
    run->add_option("--out", o.out_dir, "Output directory (default: $ADAPTIVE_SIM_OUT or ./out)");

    auto* sweep = app.add_subcommand("sweep", "Run the delay x outer-learning-rate grid and write sweep.csv");
    add_common(sweep);
    sweep->add_option("--out", o.out_dir, "Output directory (default: $ADAPTIVE_SIM_OUT or ./out)");
    sweep->add_option("--workers", o.workers, "Worker threads (default: logical cores)");

    auto* verify = app.add_subcommand("verify", "Run the acceptance checks and print a pass/fail table");
    add_common(verify);
    verify->add_option("--only", o.only, "Run only the named checks")->take_all();

    auto* emit = app.add_subcommand("emit-config", "Print the resolved scenario as JSON");
    add_common(emit);
    emit->add_option("--out", o.out_dir, "Write scenario.json into this directory instead of stdout");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (verify->parsed()) return cmd_verify(o);
        return cmd_emit_config(o);
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const scenario::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
