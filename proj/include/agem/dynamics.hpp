#pragma once

#include "agem/objective.hpp"
#include "agem/trajectory.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace agem::dynamics {

enum class SystemKind { agem_limit, high_resolution, gradient_flow };

SystemKind parse_system_kind(std::string_view id);
std::string_view system_kind_name(SystemKind kind);

struct OdeState {
    Vector v;
    double r = kNaN;
    Vector theta;
    double t = 0.0;

    // U(0) = (0, F(θ0), θ0).
    static OdeState initial(const RootView& view, const Vector& theta0);
};

struct OdeDerivative {
    Vector dv;
    double dr = 0.0;
    Vector dtheta;
};

struct OdeSystem {
    SystemKind kind = SystemKind::agem_limit;
    double epsilon = 0.1;  // unused by gradient_flow
    double eta = 0.0;      // only high_resolution reads it
    const RootView* view = nullptr;

    bool uses_epsilon() const { return kind != SystemKind::gradient_flow; }
    void validate() const;
};

//   agem_limit:       εv' = -v + ∇F,  r' = -2r|v|²,            θ' = -2rv
//   high_resolution:  εv' = -v + ∇F,  r' = -2r|v|²/(1+2η|v|²), θ' = -2rv/(1+2η|v|²)
//   gradient_flow:    v' = 0,         r' = -2r|∇F|²,           θ' = -∇f
OdeDerivative rhs(const OdeSystem& system, const OdeState& state);

inline constexpr std::size_t kMaxStoredSamples = 10000;

// Classical RK4. For the ε-systems dt must not exceed ε/10.
Trajectory integrate_rk4(const OdeSystem& system, const OdeState& state0, double T, double dt);

// agem_limit only: exact relaxation of v for frozen θ, then (r, θ) advanced
// with frozen v, arranged symmetrically. Stable for any ε.
Trajectory integrate_split(const OdeSystem& system, const OdeState& state0, double T, double dt);

enum class Integrator { automatic, rk4, split };

Integrator parse_integrator(std::string_view id);
std::string_view integrator_name(Integrator integrator);

// `automatic` picks the splitting for agem_limit with ε < 1e-3, RK4 otherwise.
Trajectory integrate(const OdeSystem& system, const OdeState& state0, double T, double dt,
                     Integrator integrator = Integrator::automatic);

// Final RK4 state without storing samples. Throws NonFiniteError on blow-up.
OdeState advance_rk4(const OdeSystem& system, const OdeState& state0, double T, double dt);

// max over samples of |r(t) - F(θ(t))| for the gradient flow from r0 = F(θ0).
double gradient_flow_equivalence(const RootView& view, const Vector& theta0, double T, double dt);

struct ConsistencyRow {
    double eta = kNaN;
    double beta = kNaN;
    std::int64_t steps = 0;
    double error = kNaN;
    // error(previous η) / error(this η); NaN on the first row.
    double ratio = kNaN;
};

struct ConsistencyStudy {
    double epsilon = kNaN;
    double T = kNaN;
    double reference_dt = kNaN;
    // Change of the reference solution when its dt is halved.
    double richardson_change = kNaN;
    std::vector<ConsistencyRow> rows;

    bool strictly_decreasing() const;
    bool ratios_within(double lo, double hi) const;
};

inline constexpr double kRichardsonTol = 1e-9;

/**
 * Runs AGEM with β = ε/(ε+η) for ⌊T/η⌋ steps for every η and compares
 * (v_{k-1}, r_k, θ_k) with the agem_limit solution at t = kη, computed by
 * RK4 at dt = min(η, ε)/10. Throws ConvergenceError when halving the
 * reference dt moves the answer by kRichardsonTol or more.
 */
ConsistencyStudy consistency_study(const Objective& obj, const Vector& theta0, double epsilon,
                                   double T, const std::vector<double>& etas);

}  // namespace agem::dynamics
