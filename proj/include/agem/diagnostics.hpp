#pragma once

#include "agem/objective.hpp"
#include "agem/trajectory.hpp"

#include <cstddef>
#include <span>
#include <string>

namespace agem::diagnostics {

// Outcome of a quantitative check. `slack` >= 0 means the inequality holds
// with that much room; `at` is the time/step of the tightest sample.
struct Verdict {
    bool passed = true;
    double slack = 0.0;
    double at = 0.0;
    std::string detail;
};

// r_{k+1}² - r_k² + (r_{k+1} - r_k)² + |θ_{k+1} - θ_k|²/η.
// Zero in exact arithmetic for every AEGD, SGEM and AGEM step.
double energy_identity_residual(double r_prev, const Vector& theta_prev, double r_next,
                                const Vector& theta_next, double eta);

// Every stored step satisfies |residual| <= rel_tol · r0². Slack is reported
// in units of r0².
Verdict energy_identity_check(const Trajectory& traj, double eta, double rel_tol = 1e-12);

// η Σ(r_{k+1} - r_k)² + Σ|θ_{k+1} - θ_k|² <= η r0² (1 + rel_tol) on every
// prefix. Requires an unsubsampled trajectory.
Verdict summed_bound_check(const Trajectory& traj, double eta, double rel_tol = 1e-12);

// r never increases, and strictly decreases on every step whose
// 2η|v|² is resolvable in double precision.
Verdict energy_monotonicity_check(const Trajectory& traj, double eta);

// Q = F(θ) + εr|v|².
double lyapunov_Q(const RootView& view, const Vector& theta, double r, const Vector& v,
                  double epsilon);

// Q(t_{j+1}) <= Q(t_j) + tol along the stored samples.
Verdict lyapunov_decay_check(const Trajectory& traj, double tol);

// Sample-wise bounds of a limit-ODE trajectory: 0 < r <= r0,
// F(θ) <= F(θ0) + εr0|v0|² and |v| <= max(|v0|, running max of |∇F|).
// `rel_tol` absorbs rounding and the sampling of the running max.
Verdict ode_bounds_check(const Trajectory& traj, const RootView& view, double epsilon,
                         double rel_tol = 1e-9);

struct EpsilonThresholds {
    double eps1 = kNaN;
    double eps2 = kNaN;
    double min() const { return eps1 < eps2 ? eps1 : eps2; }
};

// ε1 = δ(1-δ)F*/(2L F0), ε2 = (2-δ)(1-δ)(F0 + F* r*/F0)/(2μ F0).
EpsilonThresholds epsilon_thresholds(double mu, double L, double F0, double F_star,
                                     double r_star, double delta);

/**
 * Parameters of the control function E = a(f - f*) - ε⟨∇f, v⟩ + λεr|v|².
 *
 * `admissible()` fills in the closed-form pair a = εμ/(F0(2-δ)),
 * λ = (1-δ)F* / r0 with r0 = F0. The rate bound only applies when
 * ε <= min(ε1, ε2).
 */
struct ControlParams {
    double delta = 0.5;
    double a = kNaN;
    double lambda = kNaN;
    double epsilon = kNaN;
    double mu = kNaN;
    double L = kNaN;
    double r_star = kNaN;
    double F0 = kNaN;
    double F_star = kNaN;

    static ControlParams admissible(double delta, double epsilon, double mu, double L,
                                    double r_star, double F0, double F_star);

    EpsilonThresholds thresholds() const {
        return epsilon_thresholds(mu, L, F0, F_star, r_star, delta);
    }
    // Empty when admissible, otherwise the violated condition.
    std::string admissibility_violation() const;
    bool is_admissible() const { return admissibility_violation().empty(); }
};

double control_E(const RootView& view, const Vector& theta, const Vector& v, double r,
                 const ControlParams& params, double f_star);

// E(t_{j+1}) e^{(δ/ε) t_{j+1}} <= E(t_j) e^{(δ/ε) t_j} (1 + rel_tol) along the
// samples; needs the full v vectors.
Verdict control_decay_check(const Trajectory& traj, const RootView& view,
                            const ControlParams& params, double f_star, double rel_tol = 1e-6);

// min over a tensor grid of |∇f|²/(2(f - f*)), skipping points with
// f - f* < 1e-12. Needs a known f*.
double pl_constant_estimate(const Objective& obj, const Box& region, int grid_per_axis);

struct LojasiewiczFit {
    double alpha = kNaN;
    double c = kNaN;
    double rsq = kNaN;
    std::size_t samples = 0;
};

inline constexpr double kLojasiewiczLow = 1e-12;
inline constexpr double kLojasiewiczHigh = 1e-2;

// Least squares of log|∇f| against log(f - f*) over samples with
// f - f* in (lo, hi): slope = 1 - α, intercept = log c.
LojasiewiczFit lojasiewicz_fit(const Trajectory& traj, double f_star,
                               double lo = kLojasiewiczLow, double hi = kLojasiewiczHigh);

enum class RateModel { exponential, power };

struct RateFit {
    RateModel model = RateModel::exponential;
    // Decay rate K of C e^{-Kt}, or exponent p of C (t+1)^p.
    double rate_or_exponent = kNaN;
    double prefactor = kNaN;
    double rsq = kNaN;
    std::size_t window_begin = 0;
    std::size_t window_end = 0;
};

// Ordinary least squares y = slope·x + intercept.
struct LineFit {
    double slope = kNaN;
    double intercept = kNaN;
    double rsq = kNaN;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

RateFit fit_exponential(std::span<const double> t, std::span<const double> d);
RateFit fit_power(std::span<const double> t, std::span<const double> d);

// Last stored r: the finite-horizon stand-in for the limit r*.
double measured_r_star(const Trajectory& traj);

/**
 * f(θ(t)) - f* <= (f0 - f*)(e^{-2μr* t/(F0(2-δ))} + 2με/(δ(2-δ)) e^{-(δ/ε)t})
 * at every sample. Throws PreconditionError when the parameters are not
 * admissible or the trajectory does not start from v0 = 0, r0 = F(θ0).
 */
Verdict rate_bound_check(const Trajectory& traj, const ControlParams& params, double f_star);

struct ThetaRateResult {
    RateFit fit;
    bool passed = false;
    bool vacuous = false;
    // -α/(1-2α) or -α/(2-2α); NaN for the exponential case.
    double predicted_exponent = kNaN;
    double margin = kNaN;
};

inline constexpr double kTailFraction = 1e-1;

/**
 * Fits |θ(t) - θ*| on the tail (samples after the distance first drops below
 * tail_fraction times its initial value) to the model implied by α:
 * exponential for α = 1/2 (within 0.02), power law otherwise. Exponential
 * passes with any positive rate; power passes when the fitted exponent is at
 * most the predicted exponent + 0.1.
 */
ThetaRateResult theta_rate_check(const Trajectory& traj, const Vector& theta_star, double alpha,
                                 double tail_fraction = kTailFraction);

// Grid surrogates for the step-size thresholds η1 and η3 (suffix _hat).
struct EtaStarProbe {
    double eta1_hat = kNaN;
    double eta3_hat = kNaN;
    double r0 = kNaN;
    double F_star = kNaN;
    double max_grad_F_sigma2 = kNaN;
    double max_grad_F_sigma3 = kNaN;
    double max_L_F_hull3 = kNaN;
    // Lipschitz-modulus stand-in for δ_F(r0): r0 / max_{Σ3} |∇F|.
    double delta_F_hat = kNaN;
    std::size_t sigma2_points = 0;
    std::size_t sigma3_points = 0;
};

EtaStarProbe eta_star_probe(const Objective& obj, const Vector& theta0, const Box& region,
                            int grid_per_axis);

}  // namespace agem::diagnostics
