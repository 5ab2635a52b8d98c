#pragma once

#include "agem/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agem {

/**
 * A differentiable objective f : R^n -> R together with the shift c that
 * makes F = sqrt(f + c) well defined.
 *
 * Objectives are immutable after construction; every accessor is safe to
 * call concurrently.
 */
struct Objective {
    std::string name;
    int dim = 1;
    double shift_c = 1.0;
    std::function<double(const Vector&)> eval;
    std::function<Vector(const Vector&)> grad;
    std::optional<double> known_fstar;
    std::vector<Vector> known_minimizers;
    // Region on which region-restricted quantities (L, PL constant, grid
    // probes) are computed.
    Box working_box;

    double value(const Vector& theta) const { return eval(theta); }
    Vector gradient(const Vector& theta) const { return grad(theta); }
};

// Everything derived from one evaluation of f at θ.
struct RootEval {
    double f = kNaN;
    Vector grad_f;
    double F = kNaN;
    Vector grad_F;
};

/**
 * The shifted-root view F(θ) = sqrt(f(θ) + c), with ∇F = ∇f / (2F).
 *
 * Holds the objective by reference; the objective must outlive the view.
 * `F_star_floor` is the positive lower bound F* used by the diagnostics.
 */
class RootView {
public:
    explicit RootView(const Objective& base);
    RootView(const Objective& base, double F_star_floor);

    const Objective& base() const { return *base_; }
    double F_star_floor() const { return F_star_floor_; }

    // Throws DomainError when f(θ) + c <= 0.
    double value(const Vector& theta) const;
    Vector gradient(const Vector& theta) const;
    RootEval evaluate(const Vector& theta) const;

private:
    const Objective* base_;
    double F_star_floor_;
};

double F_value(const RootView& view, const Vector& theta);
Vector F_grad(const RootView& view, const Vector& theta);

// c = 1 when f* >= 0, otherwise 1 - f*; keeps F* = sqrt(f* + c) >= 1.
double default_shift(double fstar_lower_bound);

// Builtin registry. Accepted names: quadratic, quadratic_<n>, rosenbrock2d,
// pl_sine, quartic, quartic_<n>, shifted_quadratic, shifted_quadratic_<n>.
// Throws std::invalid_argument for anything else.
Objective make_builtin(std::string_view name);
std::vector<std::string> builtin_names();
bool is_builtin(std::string_view name);

inline constexpr double kDefaultFdStep = 1e-5;

// max_i |g_i - g_fd,i| / (1 + |g|_inf) with central differences of step h.
double fd_grad_check(const Objective& obj, const Vector& theta, double h = kDefaultFdStep);

Vector fd_gradient(const std::function<double(const Vector&)>& fn, const Vector& theta,
                   double h = kDefaultFdStep);

// Symmetrised Jacobian of a gradient field, one central difference per axis.
Matrix fd_hessian(const std::function<Vector(const Vector&)>& gradient, const Vector& theta,
                  double h = kDefaultFdStep);

inline constexpr int kPowerIterationCap = 500;
inline constexpr double kPowerIterationTol = 1e-10;

// Largest (algebraic) eigenvalue of a symmetric matrix by shifted power
// iteration. Throws ConvergenceError after kPowerIterationCap iterations.
double largest_eigenvalue(const Matrix& sym);

// Inclusive tensor grid with `per_axis` points per coordinate (the box
// centre when per_axis == 1).
std::vector<Vector> grid_points(const Box& region, int per_axis);

// max over the grid of the largest eigenvalue of the finite-difference
// Hessian of f: the estimate of L restricted to `region`.
double hessian_max_eig(const Objective& obj, const Box& region, int samples);

}  // namespace agem
