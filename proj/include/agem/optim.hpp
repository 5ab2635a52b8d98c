#pragma once

#include "agem/objective.hpp"
#include "agem/trajectory.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace agem::optim {

enum class Method { aegd, sgem, agem, gd, gdm };

// Throws std::invalid_argument for unknown identifiers.
Method parse_method(std::string_view id);
std::string_view method_name(Method m);
bool is_energy_method(Method m);

struct Hyper {
    double eta = 0.1;
    double beta = 0.0;

    // Momentum time scale ε = βη/(1-β); derived, never stored.
    double epsilon() const { return beta * eta / (1.0 - beta); }
    void validate() const;
};

// AEGD/AGEM state after k steps: (θ_k, r_k, v_{k-1}).
struct AgemState {
    Vector theta;
    double r = kNaN;
    Vector v;
    std::int64_t k = 0;
    double eta = 0.1;
    double beta = 0.0;

    double epsilon() const { return beta * eta / (1.0 - beta); }
    // θ0 with r0 = F(θ0) and v_{-1} = 0.
    static AgemState start(const RootView& view, const Vector& theta0, const Hyper& hyper);
};

// SGEM state after k steps: (θ_k, r_k, m_{k-1}, v_{k-1}).
struct SgemState {
    Vector theta;
    double r = kNaN;
    Vector m;
    Vector v;
    std::int64_t k = 0;
    double eta = 0.1;
    double beta = 0.0;

    double epsilon() const { return beta * eta / (1.0 - beta); }
    static SgemState start(const RootView& view, const Vector& theta0, const Hyper& hyper);
};

// Plain GD and heavy-ball state; u is the velocity.
struct HeavyBallState {
    Vector theta;
    Vector u;
    std::int64_t k = 0;
    double eta = 0.1;
    double beta = 0.0;

    static HeavyBallState start(const Vector& theta0, const Hyper& hyper);
};

// v' = βv + (1-β)∇F(θ); r' = r/(1 + 2η|v'|²); θ' = θ - 2ηr'v'.
AgemState agem_step(const AgemState& state, const RootView& view);
// agem_step with β = 0, so both produce bit-identical iterates.
AgemState aegd_step(const AgemState& state, const RootView& view);
// m' = βm + (1-β)∇f(θ); v' = m'/((1-β^{k+1}) 2F(θ)); then as AGEM.
SgemState sgem_step(const SgemState& state, const RootView& view);
HeavyBallState gd_step(const HeavyBallState& state, const Objective& obj);
// u' = βu - η∇f(θ); θ' = θ + u'.
HeavyBallState gdm_step(const HeavyBallState& state, const Objective& obj);

// Stopping rules are OR-combined; a tolerance <= 0 disables that rule.
struct StopRule {
    std::int64_t budget = 1000;
    double grad_tol = 0.0;
    double f_tol = 0.0;
};

struct RunOptions {
    // Store every n-th step (the initial and final states are always kept).
    std::int64_t record_every = 1;
    // Divergence guard threshold on f.
    double f_abort = 1e12;
};

/**
 * Runs `method` from θ0 until the budget or a stopping rule is hit.
 *
 * Never throws for numerical trouble during the run: a diverging or
 * non-finite run returns the partial trajectory with `failure` set. Bad
 * hyperparameters or a wrong-sized θ0 are rejected up front.
 */
Trajectory run(Method method, const Objective& obj, const Vector& theta0, const Hyper& hyper,
               const StopRule& stop, const RunOptions& options = {});

}  // namespace agem::optim
