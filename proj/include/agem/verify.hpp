#pragma once

#include "agem/harness.hpp"

#include <string>
#include <vector>

namespace agem::verify {

struct CheckResult {
    std::string id;
    std::string name;
    bool passed = false;
    // Room left in the check's own units; negative when it failed.
    double margin = kNaN;
    std::string detail;
    double seconds = 0.0;
    // Wall-clock budget in seconds, 0 when unconstrained.
    double time_limit = 0.0;

    bool within_time() const { return time_limit <= 0.0 || seconds <= time_limit; }
    bool ok() const { return passed && within_time(); }
};

inline constexpr int kCriterionCount = 12;

// Acceptance criterion 1..12.
CheckResult criterion(int number);
std::vector<CheckResult> acceptance_suite();

// Additional module invariants (finite-difference gradients, PL grid,
// control-function decay, ...). Self-contained, no files needed.
std::vector<CheckResult> invariant_suite();

struct Fig1Row {
    std::string label;
    double eta = kNaN;
    double beta = kNaN;
    std::int64_t iterations = 0;
    bool reached = false;
    double final_gap = kNaN;
};

// Runs every method of a comparison config in memory; iterations are the
// steps taken until f - f* <= stop.f_tol (or the budget).
std::vector<Fig1Row> fig1_rows(const harness::ExperimentConfig& config);

// AGEM reaches the target, and in strictly fewer iterations than every
// other method listed.
CheckResult fig1_ordering(const std::vector<Fig1Row>& rows);

std::string format_line(const CheckResult& r);

}  // namespace agem::verify
