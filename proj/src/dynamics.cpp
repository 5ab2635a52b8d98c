#include "agem/dynamics.hpp"

#include "agem/diagnostics.hpp"
#include "agem/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace agem::dynamics {

namespace {

// dt-grid: n steps, the last one shortened so the run ends exactly at T.
std::int64_t step_count(double T, double dt) {
    if (T <= 0.0) return 0;
    return static_cast<std::int64_t>(std::ceil(T / dt * (1.0 - 1e-12)));
}

OdeState axpy(const OdeState& s, double h, const OdeDerivative& d) {
    OdeState out;
    out.v = s.v + h * d.dv;
    out.r = s.r + h * d.dr;
    out.theta = s.theta + h * d.dtheta;
    out.t = s.t + h;
    return out;
}

bool finite(const OdeState& s) {
    return s.v.allFinite() && std::isfinite(s.r) && s.theta.allFinite();
}

OdeState rk4_step(const OdeSystem& sys, const OdeState& s, double h) {
    const OdeDerivative k1 = rhs(sys, s);
    const OdeDerivative k2 = rhs(sys, axpy(s, 0.5 * h, k1));
    const OdeDerivative k3 = rhs(sys, axpy(s, 0.5 * h, k2));
    const OdeDerivative k4 = rhs(sys, axpy(s, h, k3));
    OdeState out;
    out.v = s.v + (h / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    out.r = s.r + (h / 6.0) * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr);
    out.theta = s.theta + (h / 6.0) * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
    out.t = s.t + h;
    return out;
}

// v <- ∇F(θ) + (v - ∇F(θ)) e^{-h/ε}, θ frozen.
void relax_v(const OdeSystem& sys, OdeState& s, double h) {
    const Vector g = sys.view->gradient(s.theta);
    s.v = g + (s.v - g) * std::exp(-h / sys.epsilon);
}

// (r, θ) with v frozen: r is exact, θ uses the midpoint value of r.
void drift(OdeState& s, double h) {
    const double a = s.v.squaredNorm() * h;
    const double r_mid = s.r * std::exp(-a);
    s.theta = s.theta - 2.0 * h * r_mid * s.v;
    s.r = s.r * std::exp(-2.0 * a);
}

OdeState split_step(const OdeSystem& sys, const OdeState& s, double h) {
    OdeState out = s;
    relax_v(sys, out, 0.5 * h);
    drift(out, h);
    relax_v(sys, out, 0.5 * h);
    out.t = s.t + h;
    return out;
}

TrajectoryPoint sample(const OdeSystem& sys, const OdeState& s) {
    TrajectoryPoint p;
    p.time = s.t;
    p.theta = s.theta;
    p.v = s.v;
    p.v_norm = s.v.norm();
    p.r = s.r;
    const Objective& obj = sys.view->base();
    p.f = obj.value(s.theta);
    p.grad_f_norm = obj.gradient(s.theta).norm();
    const double eps = sys.uses_epsilon() ? sys.epsilon : 0.0;
    if (s.r > 0.0) p.Q = diagnostics::lyapunov_Q(*sys.view, s.theta, s.r, s.v, eps);
    return p;
}

template <class Step>
Trajectory drive(const OdeSystem& sys, const OdeState& state0, double T, double dt,
                 std::string label, Step&& step) {
    Trajectory traj;
    traj.label = std::move(label);
    const std::int64_t n = step_count(T, dt);
    const std::int64_t stride =
        std::max<std::int64_t>(1, (n + static_cast<std::int64_t>(kMaxStoredSamples) - 1) /
                                      static_cast<std::int64_t>(kMaxStoredSamples));
    const double t_end = state0.t + std::max(T, 0.0);

    OdeState s = state0;
    try {
        traj.points.push_back(sample(sys, s));
        for (std::int64_t j = 1; j <= n; ++j) {
            const double h = j == n ? t_end - s.t : dt;
            s = step(sys, s, h);
            if (j == n) s.t = t_end;
            if (!finite(s)) {
                std::ostringstream os;
                os << "non-finite state at t = " << s.t;
                traj.failure = os.str();
                break;
            }
            if (j % stride == 0 || j == n) traj.points.push_back(sample(sys, s));
            traj.steps = j;
        }
    } catch (const DomainError& e) {
        traj.failure = e.what();
    }
    return traj;
}

std::string label_for(const OdeSystem& sys) {
    return std::string(system_kind_name(sys.kind)) + "_" + sys.view->base().name;
}

void check_horizon(double T, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("integrate: dt must be > 0");
    if (!(T >= 0.0) || !std::isfinite(T)) throw PreconditionError("integrate: T must be >= 0");
}

void check_rk4_stability(const OdeSystem& sys, double dt) {
    if (sys.uses_epsilon() && dt > sys.epsilon / 10.0 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "integrate_rk4: dt = " << dt << " is too large for eps = " << sys.epsilon
           << "; need dt <= " << sys.epsilon / 10.0 << " (or use the split integrator)";
        throw PreconditionError(os.str());
    }
}

}  // namespace

SystemKind parse_system_kind(std::string_view id) {
    if (id == "agem_limit") return SystemKind::agem_limit;
    if (id == "high_resolution") return SystemKind::high_resolution;
    if (id == "gradient_flow") return SystemKind::gradient_flow;
    throw std::invalid_argument("unknown ODE system '" + std::string(id) +
                                "' (expected agem_limit, high_resolution or gradient_flow)");
}

std::string_view system_kind_name(SystemKind kind) {
    switch (kind) {
        case SystemKind::agem_limit: return "agem_limit";
        case SystemKind::high_resolution: return "high_resolution";
        case SystemKind::gradient_flow: return "gradient_flow";
    }
    return "?";
}

Integrator parse_integrator(std::string_view id) {
    if (id == "auto" || id == "automatic") return Integrator::automatic;
    if (id == "rk4") return Integrator::rk4;
    if (id == "split") return Integrator::split;
    throw std::invalid_argument("unknown integrator '" + std::string(id) +
                                "' (expected auto, rk4 or split)");
}

std::string_view integrator_name(Integrator integrator) {
    switch (integrator) {
        case Integrator::automatic: return "auto";
        case Integrator::rk4: return "rk4";
        case Integrator::split: return "split";
    }
    return "?";
}

OdeState OdeState::initial(const RootView& view, const Vector& theta0) {
    OdeState s;
    s.v = Vector::Zero(theta0.size());
    s.r = view.value(theta0);
    s.theta = theta0;
    return s;
}

void OdeSystem::validate() const {
    if (view == nullptr) throw PreconditionError("OdeSystem: no objective attached");
    if (uses_epsilon() && !(epsilon > 0.0)) throw PreconditionError("OdeSystem: eps must be > 0");
    if (!(eta >= 0.0)) throw PreconditionError("OdeSystem: eta must be >= 0");
}

OdeDerivative rhs(const OdeSystem& system, const OdeState& state) {
    OdeDerivative d;
    if (system.kind == SystemKind::gradient_flow) {
        const RootEval e = system.view->evaluate(state.theta);
        d.dv = Vector::Zero(state.v.size());
        d.dr = -2.0 * state.r * e.grad_F.squaredNorm();
        d.dtheta = -e.grad_f;
        return d;
    }
    const Vector gF = system.view->gradient(state.theta);
    const double v2 = state.v.squaredNorm();
    const double damp =
        system.kind == SystemKind::high_resolution ? 1.0 + 2.0 * system.eta * v2 : 1.0;
    d.dv = (gF - state.v) / system.epsilon;
    d.dr = -2.0 * state.r * v2 / damp;
    d.dtheta = (-2.0 * state.r / damp) * state.v;
    return d;
}

Trajectory integrate_rk4(const OdeSystem& system, const OdeState& state0, double T, double dt) {
    system.validate();
    check_horizon(T, dt);
    check_rk4_stability(system, dt);
    return drive(system, state0, T, dt, label_for(system), rk4_step);
}

Trajectory integrate_split(const OdeSystem& system, const OdeState& state0, double T, double dt) {
    system.validate();
    check_horizon(T, dt);
    if (system.kind != SystemKind::agem_limit) {
        throw PreconditionError("integrate_split: only the agem_limit system is supported");
    }
    return drive(system, state0, T, dt, label_for(system), split_step);
}

Trajectory integrate(const OdeSystem& system, const OdeState& state0, double T, double dt,
                     Integrator integrator) {
    if (integrator == Integrator::automatic) {
        integrator = system.kind == SystemKind::agem_limit && system.epsilon < 1e-3
                         ? Integrator::split
                         : Integrator::rk4;
    }
    return integrator == Integrator::split ? integrate_split(system, state0, T, dt)
                                           : integrate_rk4(system, state0, T, dt);
}

OdeState advance_rk4(const OdeSystem& system, const OdeState& state0, double T, double dt) {
    system.validate();
    check_horizon(T, dt);
    check_rk4_stability(system, dt);
    const std::int64_t n = step_count(T, dt);
    const double t_end = state0.t + T;
    OdeState s = state0;
    for (std::int64_t j = 1; j <= n; ++j) {
        s = rk4_step(system, s, j == n ? t_end - s.t : dt);
        if (!finite(s)) throw NonFiniteError("advance_rk4: non-finite state", s.theta);
    }
    s.t = t_end;
    return s;
}

double gradient_flow_equivalence(const RootView& view, const Vector& theta0, double T,
                                 double dt) {
    OdeSystem sys;
    sys.kind = SystemKind::gradient_flow;
    sys.view = &view;
    const Trajectory traj = integrate_rk4(sys, OdeState::initial(view, theta0), T, dt);
    if (!traj.ok()) throw NonFiniteError("gradient flow failed: " + *traj.failure, theta0);
    double defect = 0.0;
    for (const auto& p : traj.points) {
        defect = std::max(defect, std::abs(p.r - view.value(p.theta)));
    }
    return defect;
}

bool ConsistencyStudy::strictly_decreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].error < rows[i - 1].error)) return false;
    }
    return true;
}

bool ConsistencyStudy::ratios_within(double lo, double hi) const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].ratio >= lo && rows[i].ratio <= hi)) return false;
    }
    return true;
}

ConsistencyStudy consistency_study(const Objective& obj, const Vector& theta0, double epsilon,
                                   double T, const std::vector<double>& etas) {
    if (etas.empty()) throw PreconditionError("consistency_study: empty step-size list");
    if (!(epsilon > 0.0)) throw PreconditionError("consistency_study: eps must be > 0");
    if (!(T > 0.0)) throw PreconditionError("consistency_study: T must be > 0");
    for (double eta : etas) {
        if (!(eta > 0.0)) throw PreconditionError("consistency_study: step sizes must be > 0");
    }
    for (std::size_t i = 1; i < etas.size(); ++i) {
        if (!(etas[i] < etas[i - 1])) {
            throw PreconditionError("consistency_study: step sizes must be strictly decreasing");
        }
    }

    const RootView view = obj.known_fstar ? RootView(obj) : RootView(obj, 1.0);
    OdeSystem sys;
    sys.kind = SystemKind::agem_limit;
    sys.epsilon = epsilon;
    sys.view = &view;

    ConsistencyStudy study;
    study.epsilon = epsilon;
    study.T = T;
    study.reference_dt = std::min(*std::min_element(etas.begin(), etas.end()), epsilon) / 10.0;
    const OdeState start = OdeState::initial(view, theta0);

    auto pack = [](const Vector& v, double r, const Vector& theta) {
        Vector u(v.size() + 1 + theta.size());
        u << v, r, theta;
        return u;
    };

    study.richardson_change = 0.0;
    for (double eta : etas) {
        ConsistencyRow row;
        row.eta = eta;
        row.beta = epsilon / (epsilon + eta);
        row.steps = static_cast<std::int64_t>(std::floor(T / eta + 1e-9));
        const double t_k = static_cast<double>(row.steps) * eta;

        optim::AgemState s = optim::AgemState::start(view, theta0, {eta, row.beta});
        for (std::int64_t k = 0; k < row.steps; ++k) s = optim::agem_step(s, view);

        const OdeState ref = advance_rk4(sys, start, t_k, study.reference_dt);
        const OdeState fine = advance_rk4(sys, start, t_k, study.reference_dt / 2.0);
        const Vector U_ref = pack(ref.v, ref.r, ref.theta);
        const double change = (pack(fine.v, fine.r, fine.theta) - U_ref).norm();
        study.richardson_change = std::max(study.richardson_change, change);
        if (!(change < kRichardsonTol)) {
            throw ConvergenceError("consistency_study: reference solution not converged", change);
        }
        row.error = (pack(s.v, s.r, s.theta) - U_ref).norm();
        if (!study.rows.empty()) row.ratio = study.rows.back().error / row.error;
        study.rows.push_back(row);
    }
    return study;
}

}  // namespace agem::dynamics
