// Prints one PASS/FAIL line per acceptance check against the builtin 747 scenario.
// Usage: acceptance [criterion-key ...]   (no arguments runs everything)

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "adaptive_pilot/verification.hpp"

int main(int argc, char** argv) {
    using namespace adaptive_pilot;
    const std::vector<std::string> only(argv + 1, argv + argc);
    const auto config = scenario::builtin_747();
    bool all_passed = true;
    bool matched = only.empty();
    for (const auto& crit : verification::criteria()) {
        if (!only.empty() && std::find(only.begin(), only.end(), crit.key) == only.end()) continue;
        matched = true;
        const auto start = std::chrono::steady_clock::now();
        const auto lines = verification::run_criterion(crit, config);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool passed = true;
        for (const auto& l : lines) passed = passed && l.passed;
        std::printf("%s  %-12s %s (%.1f s)\n", passed ? "PASS" : "FAIL", crit.key.c_str(), crit.title.c_str(), secs);
        for (const auto& l : lines) {
            std::printf("      %s %s: %s\n", l.passed ? "ok  " : "FAIL", l.name.c_str(), l.detail.c_str());
        }
        all_passed = all_passed && passed;
    }
    if (!matched) {
        std::fprintf(stderr, "no criterion matches the given names\n");
        return 1;
    }
    return all_passed ? 0 : 1;
}
