#include "agem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace agem::diagnostics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

void require_points(const Trajectory& traj, const char* who) {
    if (traj.points.empty()) throw PreconditionError(std::string(who) + ": empty trajectory");
}

}  // namespace

double energy_identity_residual(double r_prev, const Vector& theta_prev, double r_next,
                                const Vector& theta_next, double eta) {
    const double dr = r_next - r_prev;
    return r_next * r_next - r_prev * r_prev + dr * dr +
           (theta_next - theta_prev).squaredNorm() / eta;
}

Verdict energy_identity_check(const Trajectory& traj, double eta, double rel_tol) {
    require_points(traj, "energy_identity_check");
    const double r0 = traj.front().r;
    const double scale = r0 * r0;
    Verdict out;
    out.slack = rel_tol;
    for (std::size_t j = 1; j < traj.points.size(); ++j) {
        const auto& a = traj.points[j - 1];
        const auto& b = traj.points[j];
        if (b.time - a.time != 1.0) {
            throw PreconditionError("energy_identity_check: trajectory is subsampled");
        }
        const double res = energy_identity_residual(a.r, a.theta, b.r, b.theta, eta);
        const double slack = rel_tol - std::abs(res) / scale;
        if (!(slack >= out.slack)) {
            out.slack = std::isnan(slack) ? -kInf : slack;
            out.at = b.time;
        }
    }
    out.passed = out.slack >= 0.0;
    out.detail = "max |residual|/r0^2 = " + fmt(rel_tol - out.slack);
    return out;
}

Verdict summed_bound_check(const Trajectory& traj, double eta, double rel_tol) {
    require_points(traj, "summed_bound_check");
    const double r0 = traj.front().r;
    const double budget = eta * r0 * r0;
    double sum = 0.0;
    Verdict out;
    out.slack = traj.points.size() < 2 ? rel_tol : kInf;
    for (std::size_t j = 1; j < traj.points.size(); ++j) {
        const auto& a = traj.points[j - 1];
        const auto& b = traj.points[j];
        if (b.time - a.time != 1.0) {
            throw PreconditionError("summed_bound_check: trajectory is subsampled");
        }
        const double dr = b.r - a.r;
        sum += eta * dr * dr + (b.theta - a.theta).squaredNorm();
        const double slack = (budget * (1.0 + rel_tol) - sum) / budget;
        if (!(slack >= out.slack)) {
            out.slack = std::isnan(slack) ? -kInf : slack;
            out.at = b.time;
        }
    }
    out.passed = out.slack >= 0.0;
    out.detail = "final sum / (eta r0^2) = " + fmt(sum / budget);
    return out;
}

Verdict energy_monotonicity_check(const Trajectory& traj, double eta) {
    require_points(traj, "energy_monotonicity_check");
    Verdict out;
    out.slack = kInf;
    std::size_t strict_failures = 0;
    for (std::size_t j = 1; j < traj.points.size(); ++j) {
        const auto& a = traj.points[j - 1];
        const auto& b = traj.points[j];
        const double drop = a.r - b.r;
        if (drop < out.slack) {
            out.slack = drop;
            out.at = b.time;
        }
        // b.v_norm is the velocity used on the step from a to b.
        const bool resolvable =
            2.0 * eta * b.v_norm * b.v_norm > 4.0 * std::numeric_limits<double>::epsilon() &&
            a.r >= std::numeric_limits<double>::min();
        if (drop < 0.0 || (resolvable && b.time - a.time == 1.0 && drop <= 0.0)) {
            ++strict_failures;
        }
    }
    if (traj.points.size() < 2) out.slack = 0.0;
    out.passed = strict_failures == 0;
    out.detail = "smallest decrease " + fmt(out.slack) + ", " + std::to_string(strict_failures) +
                 " violating steps";
    return out;
}

double lyapunov_Q(const RootView& view, const Vector& theta, double r, const Vector& v,
                  double epsilon) {
    if (!(r > 0.0)) throw PreconditionError("lyapunov_Q: r must be > 0");
    const double F = view.value(theta);
    if (v.size() == 0) return F;
    return F + epsilon * r * v.squaredNorm();
}

Verdict lyapunov_decay_check(const Trajectory& traj, double tol) {
    require_points(traj, "lyapunov_decay_check");
    Verdict out;
    out.slack = kInf;
    for (std::size_t j = 1; j < traj.points.size(); ++j) {
        const double slack = traj.points[j - 1].Q + tol - traj.points[j].Q;
        if (!(slack >= out.slack)) {
            out.slack = std::isnan(slack) ? -kInf : slack;
            out.at = traj.points[j].time;
        }
    }
    if (traj.points.size() < 2) out.slack = tol;
    out.passed = out.slack >= 0.0;
    out.detail = "largest increase of Q " + fmt(tol - out.slack);
    return out;
}

Verdict ode_bounds_check(const Trajectory& traj, const RootView& view, double epsilon,
                         double rel_tol) {
    require_points(traj, "ode_bounds_check");
    const auto& first = traj.front();
    const double r0 = first.r;
    const double v0 = first.v_norm;
    const double F_cap = view.value(first.theta) + epsilon * r0 * v0 * v0;
    double running = v0;
    Verdict out;
    out.slack = kInf;
    std::string worst = "none";
    auto track = [&](double slack, double t, const char* which) {
        if (!(slack >= out.slack)) {
            out.slack = std::isnan(slack) ? -kInf : slack;
            out.at = t;
            worst = which;
        }
    };
    for (const auto& p : traj.points) {
        const RootEval e = view.evaluate(p.theta);
        running = std::max(running, e.grad_F.norm());
        track(p.r, p.time, "r > 0");
        track(r0 * (1.0 + rel_tol) - p.r, p.time, "r <= r0");
        track(F_cap * (1.0 + rel_tol) - e.F, p.time, "F <= F0 + eps r0 |v0|^2");
        track(running * (1.0 + rel_tol) + rel_tol - p.v_norm, p.time, "|v| <= max |grad F|");
    }
    out.passed = out.slack >= 0.0;
    out.detail = "tightest bound: " + worst + ", slack " + fmt(out.slack);
    return out;
}

EpsilonThresholds epsilon_thresholds(double mu, double L, double F0, double F_star,
                                     double r_star, double delta) {
    if (!(mu > 0.0 && L > 0.0 && F0 > 0.0 && F_star > 0.0 && r_star > 0.0)) {
        throw PreconditionError("epsilon_thresholds: mu, L, F0, F_star, r_star must be > 0");
    }
    // The endpoints give eps1 = 0: degenerate but well defined.
    if (!(delta >= 0.0 && delta <= 1.0)) {
        throw PreconditionError("epsilon_thresholds: delta must lie in [0, 1]");
    }
    EpsilonThresholds t;
    t.eps1 = delta * (1.0 - delta) * F_star / (2.0 * L * F0);
    t.eps2 = (2.0 - delta) * (1.0 - delta) * (F0 + F_star * r_star / F0) / (2.0 * mu * F0);
    return t;
}

ControlParams ControlParams::admissible(double delta, double epsilon, double mu, double L,
                                        double r_star, double F0, double F_star) {
    ControlParams p;
    p.delta = delta;
    p.epsilon = epsilon;
    p.mu = mu;
    p.L = L;
    p.r_star = r_star;
    p.F0 = F0;
    p.F_star = F_star;
    p.a = epsilon * mu / (F0 * (2.0 - delta));
    p.lambda = (1.0 - delta) * F_star / F0;
    return p;
}

std::string ControlParams::admissibility_violation() const {
    if (!(delta > 0.0 && delta < 1.0)) return "delta = " + fmt(delta) + " is not in (0, 1)";
    if (!(epsilon > 0.0)) return "epsilon must be > 0";
    if (!(mu > 0.0 && L > 0.0 && F0 > 0.0 && F_star > 0.0 && r_star > 0.0)) {
        return "mu, L, F0, F_star and r_star must all be > 0";
    }
    const auto th = thresholds();
    if (epsilon > th.min() * (1.0 + 1e-12)) {
        return "epsilon = " + fmt(epsilon) + " exceeds min(eps1, eps2) = " + fmt(th.min());
    }
    const double a_ref = epsilon * mu / (F0 * (2.0 - delta));
    const double lambda_ref = (1.0 - delta) * F_star / F0;
    if (std::abs(a - a_ref) > 1e-12 * a_ref) return "a differs from eps mu/(F0 (2 - delta))";
    if (std::abs(lambda - lambda_ref) > 1e-12 * lambda_ref) {
        return "lambda differs from (1 - delta) F_star/F0";
    }
    return {};
}

double control_E(const RootView& view, const Vector& theta, const Vector& v, double r,
                 const ControlParams& params, double f_star) {
    const Objective& obj = view.base();
    const double f = obj.value(theta);
    const Vector g = obj.gradient(theta);
    return params.a * (f - f_star) - params.epsilon * g.dot(v) +
           params.lambda * params.epsilon * r * v.squaredNorm();
}

Verdict control_decay_check(const Trajectory& traj, const RootView& view,
                            const ControlParams& params, double f_star, double rel_tol) {
    require_points(traj, "control_decay_check");
    const Objective& obj = view.base();
    // Pointwise E' <= -(δ/ε)E integrates to E_{j+1} <= E_j e^{-(δ/ε)Δt} on
    // each interval, which avoids overflowing e^{(δ/ε)t}.
    const double rate = params.delta / params.epsilon;
    Verdict out;
    out.slack = kInf;
    double prev_E = kNaN;
    double prev_scale = kNaN;
    double prev_t = 0.0;
    for (std::size_t j = 0; j < traj.points.size(); ++j) {
        const auto& p = traj.points[j];
        if (p.v.size() != p.theta.size()) {
            throw PreconditionError("control_decay_check: samples lack the full v vector");
        }
        const double f = obj.value(p.theta);
        const Vector g = obj.gradient(p.theta);
        const double t1 = params.a * (f - f_star);
        const double t2 = params.epsilon * g.dot(p.v);
        const double t3 = params.lambda * params.epsilon * p.r * p.v.squaredNorm();
        const double E = t1 - t2 + t3;
        const double scale = std::abs(t1) + std::abs(t2) + std::abs(t3);
        if (j > 0) {
            const double bound = prev_E * std::exp(-rate * (p.time - prev_t));
            // The absolute floor only matters once E has underflowed.
            const double slack = bound + rel_tol * prev_scale + 1e-300 - E;
            if (!(slack >= out.slack)) {
                out.slack = std::isnan(slack) ? -kInf : slack;
                out.at = p.time;
            }
        }
        prev_E = E;
        prev_scale = scale;
        prev_t = p.time;
    }
    if (traj.points.size() < 2) out.slack = 0.0;
    out.passed = out.slack >= 0.0;
    out.detail = "minimum slack " + fmt(out.slack) + " at t = " + fmt(out.at);
    return out;
}

double pl_constant_estimate(const Objective& obj, const Box& region, int grid_per_axis) {
    if (!obj.known_fstar) throw PreconditionError("pl_constant_estimate: f* unknown");
    const double fstar = *obj.known_fstar;
    double best = kInf;
    std::size_t used = 0;
    for (const auto& p : grid_points(region, grid_per_axis)) {
        const double gap = obj.value(p) - fstar;
        if (gap < 1e-12) continue;
        best = std::min(best, obj.gradient(p).squaredNorm() / (2.0 * gap));
        ++used;
    }
    if (used == 0) throw PreconditionError("pl_constant_estimate: empty effective grid");
    return best;
}

LojasiewiczFit lojasiewicz_fit(const Trajectory& traj, double f_star, double lo, double hi) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& p : traj.points) {
        const double gap = p.f - f_star;
        if (gap > lo && gap < hi && p.grad_f_norm > 0.0) {
            x.push_back(std::log(gap));
            y.push_back(std::log(p.grad_f_norm));
        }
    }
    if (x.size() < 10) {
        throw PreconditionError("lojasiewicz_fit: only " + std::to_string(x.size()) +
                                " samples with f - f* in the fitting window (need 10)");
    }
    const LineFit line = fit_line(x, y);
    LojasiewiczFit out;
    out.alpha = 1.0 - line.slope;
    out.c = std::exp(line.intercept);
    out.rsq = line.rsq;
    out.samples = x.size();
    return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw PreconditionError("fit_line: need two or more paired samples");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw PreconditionError("fit_line: x values are all equal");
    LineFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    const double ss_res = std::max(0.0, syy - out.slope * sxy);
    out.rsq = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return out;
}

RateFit fit_exponential(std::span<const double> t, std::span<const double> d) {
    std::vector<double> logd(d.size());
    std::transform(d.begin(), d.end(), logd.begin(), [](double x) { return std::log(x); });
    const LineFit line = fit_line(t, logd);
    RateFit out;
    out.model = RateModel::exponential;
    out.rate_or_exponent = -line.slope;
    out.prefactor = std::exp(line.intercept);
    out.rsq = line.rsq;
    out.window_end = d.size();
    return out;
}

RateFit fit_power(std::span<const double> t, std::span<const double> d) {
    std::vector<double> logt(t.size());
    std::vector<double> logd(d.size());
    std::transform(t.begin(), t.end(), logt.begin(), [](double x) { return std::log(x + 1.0); });
    std::transform(d.begin(), d.end(), logd.begin(), [](double x) { return std::log(x); });
    const LineFit line = fit_line(logt, logd);
    RateFit out;
    out.model = RateModel::power;
    out.rate_or_exponent = line.slope;
    out.prefactor = std::exp(line.intercept);
    out.rsq = line.rsq;
    out.window_end = d.size();
    return out;
}

double measured_r_star(const Trajectory& traj) {
    require_points(traj, "measured_r_star");
    return traj.back().r;
}

Verdict rate_bound_check(const Trajectory& traj, const ControlParams& params, double f_star) {
    require_points(traj, "rate_bound_check");
    if (auto why = params.admissibility_violation(); !why.empty()) {
        throw PreconditionError("rate_bound_check: parameters not admissible: " + why);
    }
    const auto& first = traj.front();
    if (!(first.v_norm == 0.0) || (first.v.size() > 0 && first.v.norm() != 0.0)) {
        throw PreconditionError("rate_bound_check: trajectory must start from v0 = 0");
    }
    if (std::abs(first.r - params.F0) > 1e-12 * params.F0) {
        throw PreconditionError("rate_bound_check: trajectory must start from r0 = F(theta0)");
    }
    const double d = params.delta;
    const double slow = 2.0 * params.mu * params.r_star / (params.F0 * (2.0 - d));
    const double fast = d / params.epsilon;
    const double weight = 2.0 * params.mu * params.epsilon / (d * (2.0 - d));
    const double gap0 = first.f - f_star;

    Verdict out;
    out.slack = kInf;
    double worst_ratio = 0.0;
    for (const auto& p : traj.points) {
        const double t = p.time - first.time;
        const double rhs = gap0 * (std::exp(-slow * t) + weight * std::exp(-fast * t));
        const double lhs = p.f - f_star;
        const double slack = rhs - lhs;
        if (!(slack >= out.slack)) {
            out.slack = std::isnan(slack) ? -kInf : slack;
            out.at = p.time;
        }
        if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
    }
    out.passed = out.slack >= 0.0;
    out.detail = "minimum slack " + fmt(out.slack) + " at t = " + fmt(out.at) +
                 ", max lhs/rhs " + fmt(worst_ratio);
    return out;
}

ThetaRateResult theta_rate_check(const Trajectory& traj, const Vector& theta_star, double alpha,
                                 double tail_fraction) {
    require_points(traj, "theta_rate_check");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw PreconditionError("theta_rate_check: alpha must lie in (0, 1)");
    }
    std::vector<double> dist;
    dist.reserve(traj.points.size());
    for (const auto& p : traj.points) dist.push_back((p.theta - theta_star).norm());

    ThetaRateResult out;
    const bool exponential = std::abs(alpha - 0.5) <= 0.02;
    if (!exponential) {
        out.predicted_exponent = alpha < 0.5 ? -alpha / (1.0 - 2.0 * alpha)
                                           : -alpha / (2.0 - 2.0 * alpha);
    }
    const double dmax = *std::max_element(dist.begin(), dist.end());
    if (dmax == 0.0) {
        out.vacuous = true;
        out.passed = true;
        out.fit.model = exponential ? RateModel::exponential : RateModel::power;
        out.margin = 0.0;
        return out;
    }

    const double d0 = dist.front() > 0.0 ? dist.front() : dmax;
    std::size_t begin = 0;
    while (begin < dist.size() && !(dist[begin] <= tail_fraction * d0)) ++begin;

    std::vector<double> t;
    std::vector<double> d;
    std::size_t end = begin;
    for (std::size_t j = begin; j < dist.size(); ++j) {
        if (!(dist[j] > 0.0) || !std::isfinite(dist[j])) break;
        t.push_back(traj.points[j].time);
        d.push_back(dist[j]);
        end = j + 1;
    }
    if (d.size() < 10) {
        throw PreconditionError("theta_rate_check: tail too short (" + std::to_string(d.size()) +
                                " usable samples, need 10)");
    }

    if (exponential) {
        out.fit = fit_exponential(t, d);
        out.margin = out.fit.rate_or_exponent;
        out.passed = out.fit.rate_or_exponent > 0.0;
    } else {
        out.fit = fit_power(t, d);
        out.margin = out.predicted_exponent + 0.1 - out.fit.rate_or_exponent;
        out.passed = out.margin >= 0.0;
    }
    out.fit.window_begin = begin;
    out.fit.window_end = end;
    return out;
}

EtaStarProbe eta_star_probe(const Objective& obj, const Vector& theta0, const Box& region,
                            int grid_per_axis) {
    if (obj.dim > 2) throw PreconditionError("eta_star_probe: grid probe needs dim <= 2");
    if (region.dim() != obj.dim || theta0.size() != obj.dim) {
        throw PreconditionError("eta_star_probe: dimension mismatch");
    }
    const RootView view = obj.known_fstar ? RootView(obj) : RootView(obj, 1.0);
    EtaStarProbe out;
    out.r0 = view.value(theta0);
    out.F_star = view.F_star_floor();

    const auto grid = grid_points(region, grid_per_axis);
    std::vector<Vector> sigma3;
    out.max_grad_F_sigma2 = 0.0;
    out.max_grad_F_sigma3 = 0.0;
    for (const auto& p : grid) {
        const RootEval e = view.evaluate(p);
        const double gn = e.grad_F.norm();
        if (e.F <= 2.0 * out.r0) {
            ++out.sigma2_points;
            out.max_grad_F_sigma2 = std::max(out.max_grad_F_sigma2, gn);
        }
        if (e.F <= 3.0 * out.r0) {
            sigma3.push_back(p);
            out.max_grad_F_sigma3 = std::max(out.max_grad_F_sigma3, gn);
        }
    }
    out.sigma3_points = sigma3.size();
    if (out.sigma2_points == 0) {
        throw PreconditionError("eta_star_probe: no grid point of the region lies in {F <= 2 F0}");
    }

    Box hull{sigma3.front(), sigma3.front()};
    for (const auto& p : sigma3) {
        hull.lower = hull.lower.cwiseMin(p);
        hull.upper = hull.upper.cwiseMax(p);
    }
    auto gradF = [&view](const Vector& x) { return view.gradient(x); };
    out.max_L_F_hull3 = 0.0;
    for (const auto& p : grid) {
        if (!hull.contains(p)) continue;
        out.max_L_F_hull3 = std::max(out.max_L_F_hull3, largest_eigenvalue(fd_hessian(gradF, p)));
    }

    out.delta_F_hat = out.max_grad_F_sigma3 > 0.0 ? out.r0 / out.max_grad_F_sigma3 : kInf;
    out.eta1_hat = out.max_grad_F_sigma2 > 0.0
                       ? out.delta_F_hat / (2.0 * out.r0 * out.max_grad_F_sigma2)
                       : kInf;
    out.eta3_hat = out.max_L_F_hull3 > 0.0
                       ? 2.0 * out.F_star / (out.r0 * out.r0 * out.max_L_F_hull3)
                       : kInf;
    return out;
}

}  // namespace agem::diagnostics
