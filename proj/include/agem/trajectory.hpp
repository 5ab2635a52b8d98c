#pragma once

#include "agem/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agem {

// One stored sample of a discrete run (time = step index k) or of an ODE
// integration (time = t). Quantities a producer does not define stay NaN.
struct TrajectoryPoint {
    double time = 0.0;
    Vector theta;
    // Full momentum/velocity vector; empty when loaded from a table, which
    // keeps only its norm.
    Vector v;
    double r = kNaN;
    double v_norm = kNaN;
    double f = kNaN;
    double grad_f_norm = kNaN;
    double Q = kNaN;
    double E = kNaN;
    double identity_residual = kNaN;
};

// Per-step record of the discrete optimizers.
using StepRecord = TrajectoryPoint;

struct Trajectory {
    std::string label;
    std::vector<TrajectoryPoint> points;
    // Steps actually taken; can exceed points.size() when subsampled.
    std::int64_t steps = 0;
    // Set when the run aborted (divergence guard, non-finite state, domain
    // error). `points` then holds the partial trajectory.
    std::optional<std::string> failure;

    bool ok() const { return !failure.has_value(); }
    bool empty() const { return points.empty(); }
    const TrajectoryPoint& front() const { return points.front(); }
    const TrajectoryPoint& back() const { return points.back(); }
};

}  // namespace agem
