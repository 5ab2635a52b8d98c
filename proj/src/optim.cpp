#include "agem/optim.hpp"

#include "agem/diagnostics.hpp"

#include <cmath>
#include <sstream>

namespace agem::optim {

namespace {

void require_finite(const Vector& g, const Vector& theta) {
    if (!g.allFinite()) {
        std::ostringstream os;
        os << "non-finite gradient at theta = [" << theta.transpose() << "]";
        throw NonFiniteError(os.str(), theta);
    }
}

// Shared energy update: r' = r/(1 + 2η|v|²), θ' = θ - 2ηr'v.
void energy_update(Vector& theta, double& r, const Vector& v, double eta) {
    r = r / (1.0 + 2.0 * eta * v.squaredNorm());
    theta = theta - 2.0 * eta * r * v;
}

const Vector& velocity(const AgemState& s) { return s.v; }
const Vector& velocity(const SgemState& s) { return s.v; }
const Vector& velocity(const HeavyBallState& s) { return s.u; }
double energy(const AgemState& s) { return s.r; }
double energy(const SgemState& s) { return s.r; }
double energy(const HeavyBallState&) { return kNaN; }

template <class State, class StepFn>
Trajectory run_impl(Method method, const Objective& obj, const RootView* view, State state,
                    StepFn&& step, const Hyper& hyper, const StopRule& stop,
                    const RunOptions& options) {
    Trajectory traj;
    traj.label = std::string(method_name(method)) + "_" + obj.name;

    const bool energy_method = is_energy_method(method);
    const double eps = energy_method ? hyper.epsilon() : kNaN;
    double pending_residual = energy_method ? 0.0 : kNaN;

    auto make_record = [&](std::int64_t k, double f, double grad_norm) {
        TrajectoryPoint p;
        p.time = static_cast<double>(k);
        p.theta = state.theta;
        p.v = velocity(state);
        p.v_norm = p.v.norm();
        p.r = energy(state);
        p.f = f;
        p.grad_f_norm = grad_norm;
        // r can underflow to 0 after an energy collapse; Q is then undefined.
        if (energy_method && p.r > 0.0) {
            p.Q = diagnostics::lyapunov_Q(*view, state.theta, p.r, p.v, eps);
        }
        p.identity_residual = pending_residual;
        return p;
    };

    for (std::int64_t k = 0;; ++k) {
        double f = kNaN;
        double grad_norm = kNaN;
        if (state.theta.allFinite()) {
            f = obj.value(state.theta);
            grad_norm = obj.gradient(state.theta).norm();
        }
        const bool diverged = !state.theta.allFinite() || !std::isfinite(f) ||
                              f > options.f_abort;
        const bool stop_grad = stop.grad_tol > 0.0 && grad_norm <= stop.grad_tol;
        const bool stop_f = stop.f_tol > 0.0 && obj.known_fstar &&
                            f - *obj.known_fstar <= stop.f_tol;
        const bool last = diverged || stop_grad || stop_f || k >= stop.budget;

        if (k % options.record_every == 0 || last) {
            try {
                traj.points.push_back(make_record(k, f, grad_norm));
            } catch (const std::exception&) {
                // F may be undefined at a diverged point; keep the raw values.
                TrajectoryPoint p;
                p.time = static_cast<double>(k);
                p.theta = state.theta;
                p.r = energy(state);
                p.f = f;
                p.grad_f_norm = grad_norm;
                p.identity_residual = pending_residual;
                traj.points.push_back(std::move(p));
            }
        }
        traj.steps = k;
        if (diverged) {
            std::ostringstream os;
            os << "diverged at step " << k << ": f = " << f;
            traj.failure = os.str();
            break;
        }
        if (last) break;

        try {
            State next = step(state);
            if (energy_method) {
                pending_residual = diagnostics::energy_identity_residual(
                    energy(state), state.theta, energy(next), next.theta, hyper.eta);
            }
            state = std::move(next);
        } catch (const NonFiniteError& e) {
            traj.failure = std::string("step ") + std::to_string(k) + ": " + e.what();
            break;
        } catch (const DomainError& e) {
            traj.failure = std::string("step ") + std::to_string(k) + ": " + e.what();
            break;
        }
    }
    return traj;
}

}  // namespace

Method parse_method(std::string_view id) {
    if (id == "aegd") return Method::aegd;
    if (id == "sgem") return Method::sgem;
    if (id == "agem") return Method::agem;
    if (id == "gd") return Method::gd;
    if (id == "gdm") return Method::gdm;
    throw std::invalid_argument("unknown method '" + std::string(id) +
                                "' (expected aegd, sgem, agem, gd or gdm)");
}

std::string_view method_name(Method m) {
    switch (m) {
        case Method::aegd: return "aegd";
        case Method::sgem: return "sgem";
        case Method::agem: return "agem";
        case Method::gd: return "gd";
        case Method::gdm: return "gdm";
    }
    return "?";
}

bool is_energy_method(Method m) {
    return m == Method::aegd || m == Method::sgem || m == Method::agem;
}

void Hyper::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw PreconditionError("step size eta must be > 0");
    if (!(beta >= 0.0 && beta < 1.0)) throw PreconditionError("momentum beta must be in [0, 1)");
}

AgemState AgemState::start(const RootView& view, const Vector& theta0, const Hyper& hyper) {
    hyper.validate();
    AgemState s;
    s.theta = theta0;
    s.r = view.value(theta0);
    s.v = Vector::Zero(theta0.size());
    s.eta = hyper.eta;
    s.beta = hyper.beta;
    return s;
}

SgemState SgemState::start(const RootView& view, const Vector& theta0, const Hyper& hyper) {
    hyper.validate();
    SgemState s;
    s.theta = theta0;
    s.r = view.value(theta0);
    s.m = Vector::Zero(theta0.size());
    s.v = Vector::Zero(theta0.size());
    s.eta = hyper.eta;
    s.beta = hyper.beta;
    return s;
}

HeavyBallState HeavyBallState::start(const Vector& theta0, const Hyper& hyper) {
    hyper.validate();
    HeavyBallState s;
    s.theta = theta0;
    s.u = Vector::Zero(theta0.size());
    s.eta = hyper.eta;
    s.beta = hyper.beta;
    return s;
}

AgemState agem_step(const AgemState& state, const RootView& view) {
    const Vector gF = view.gradient(state.theta);
    require_finite(gF, state.theta);
    AgemState next = state;
    next.v = state.beta * state.v + (1.0 - state.beta) * gF;
    energy_update(next.theta, next.r, next.v, state.eta);
    ++next.k;
    return next;
}

AgemState aegd_step(const AgemState& state, const RootView& view) {
    AgemState s = state;
    s.beta = 0.0;
    AgemState next = agem_step(s, view);
    next.beta = state.beta;
    return next;
}

SgemState sgem_step(const SgemState& state, const RootView& view) {
    const RootEval e = view.evaluate(state.theta);
    require_finite(e.grad_f, state.theta);
    SgemState next = state;
    next.m = state.beta * state.m + (1.0 - state.beta) * e.grad_f;
    // The first update uses exponent 1, so the factor never vanishes.
    const double bias = 1.0 - std::pow(state.beta, static_cast<double>(state.k + 1));
    next.v = next.m / (bias * 2.0 * e.F);
    energy_update(next.theta, next.r, next.v, state.eta);
    ++next.k;
    return next;
}

HeavyBallState gd_step(const HeavyBallState& state, const Objective& obj) {
    HeavyBallState s = state;
    s.beta = 0.0;
    HeavyBallState next = gdm_step(s, obj);
    next.beta = state.beta;
    return next;
}

HeavyBallState gdm_step(const HeavyBallState& state, const Objective& obj) {
    const Vector g = obj.gradient(state.theta);
    require_finite(g, state.theta);
    HeavyBallState next = state;
    next.u = state.beta * state.u - state.eta * g;
    next.theta = state.theta + next.u;
    ++next.k;
    return next;
}

Trajectory run(Method method, const Objective& obj, const Vector& theta0, const Hyper& hyper,
               const StopRule& stop, const RunOptions& options) {
    hyper.validate();
    if (theta0.size() != obj.dim) {
        throw PreconditionError("run: theta0 has dimension " + std::to_string(theta0.size()) +
                                ", objective '" + obj.name + "' expects " +
                                std::to_string(obj.dim));
    }
    if (stop.budget < 0) throw PreconditionError("run: budget must be >= 0");
    if (options.record_every < 1) throw PreconditionError("run: record_every must be >= 1");

    if (!is_energy_method(method)) {
        auto state = HeavyBallState::start(theta0, hyper);
        auto step = [&](const HeavyBallState& s) {
            return method == Method::gd ? gd_step(s, obj) : gdm_step(s, obj);
        };
        return run_impl(method, obj, nullptr, std::move(state), step, hyper, stop, options);
    }

    // Without a known minimum the default shift keeps F >= 1.
    const RootView view = obj.known_fstar ? RootView(obj) : RootView(obj, 1.0);
    Trajectory traj;
    try {
        if (method == Method::sgem) {
            auto step = [&](const SgemState& s) { return sgem_step(s, view); };
            return run_impl(method, obj, &view, SgemState::start(view, theta0, hyper), step,
                            hyper, stop, options);
        }
        auto step = [&](const AgemState& s) {
            return method == Method::aegd ? aegd_step(s, view) : agem_step(s, view);
        };
        return run_impl(method, obj, &view, AgemState::start(view, theta0, hyper), step, hyper,
                        stop, options);
    } catch (const DomainError& e) {
        traj.label = std::string(method_name(method)) + "_" + obj.name;
        traj.failure = e.what();
        return traj;
    }
}

}  // namespace agem::optim
