#include "agem/objective.hpp"

#include <cmath>
#include <charconv>
#include <sstream>

namespace agem {

namespace {

void require_dim(const Vector& theta, int dim, const std::string& name) {
    if (theta.size() != dim) {
        std::ostringstream os;
        os << name << ": expected a point of dimension " << dim << ", got " << theta.size();
        throw std::invalid_argument(os.str());
    }
}

double checked_root(double shifted, const std::string& name) {
    if (!(shifted > 0.0)) {
        std::ostringstream os;
        os << "f(theta) + c = " << shifted << " <= 0 for objective '" << name
           << "'; choose a larger shift";
        throw DomainError(os.str());
    }
    return std::sqrt(shifted);
}

// Parses "<prefix>" (dimension 1) or "<prefix>_<n>".
std::optional<int> match_dimensioned(std::string_view name, std::string_view prefix) {
    if (name == prefix) return 1;
    if (name.size() <= prefix.size() + 1 || name.substr(0, prefix.size()) != prefix ||
        name[prefix.size()] != '_') {
        return std::nullopt;
    }
    auto digits = name.substr(prefix.size() + 1);
    int n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 1) return std::nullopt;
    return n;
}

Objective quadratic(int n, std::string name) {
    Objective obj;
    obj.name = std::move(name);
    obj.dim = n;
    obj.eval = [n, nm = obj.name](const Vector& x) {
        require_dim(x, n, nm);
        return x.squaredNorm();
    };
    obj.grad = [n, nm = obj.name](const Vector& x) -> Vector {
        require_dim(x, n, nm);
        return 2.0 * x;
    };
    obj.known_fstar = 0.0;
    obj.known_minimizers = {Vector::Zero(n)};
    obj.shift_c = default_shift(0.0);
    obj.working_box = Box::cube(n, -5.0, 5.0);
    return obj;
}

Objective shifted_quadratic(int n, std::string name) {
    constexpr double kOffset = -2.0;
    Objective obj;
    obj.name = std::move(name);
    obj.dim = n;
    obj.eval = [n, nm = obj.name](const Vector& x) {
        require_dim(x, n, nm);
        return (x.array() - 1.0).matrix().squaredNorm() + kOffset;
    };
    obj.grad = [n, nm = obj.name](const Vector& x) -> Vector {
        require_dim(x, n, nm);
        return 2.0 * (x.array() - 1.0).matrix();
    };
    obj.known_fstar = kOffset;
    obj.known_minimizers = {Vector::Ones(n)};
    obj.shift_c = default_shift(kOffset);
    obj.working_box = Box::cube(n, -4.0, 6.0);
    return obj;
}

// |θ|^4: not L-smooth globally and not PL near its minimizer.
Objective quartic(int n, std::string name) {
    Objective obj;
    obj.name = std::move(name);
    obj.dim = n;
    obj.eval = [n, nm = obj.name](const Vector& x) {
        require_dim(x, n, nm);
        const double s = x.squaredNorm();
        return s * s;
    };
    obj.grad = [n, nm = obj.name](const Vector& x) -> Vector {
        require_dim(x, n, nm);
        return 4.0 * x.squaredNorm() * x;
    };
    obj.known_fstar = 0.0;
    obj.known_minimizers = {Vector::Zero(n)};
    obj.shift_c = default_shift(0.0);
    obj.working_box = Box::cube(n, -2.0, 2.0);
    return obj;
}

Objective rosenbrock2d() {
    Objective obj;
    obj.name = "rosenbrock2d";
    obj.dim = 2;
    obj.eval = [](const Vector& x) {
        require_dim(x, 2, "rosenbrock2d");
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    obj.grad = [](const Vector& x) -> Vector {
        require_dim(x, 2, "rosenbrock2d");
        const double b = x[1] - x[0] * x[0];
        Vector g(2);
        g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return g;
    };
    obj.known_fstar = 0.0;
    obj.known_minimizers = {Vector::Ones(2)};
    obj.shift_c = default_shift(0.0);
    obj.working_box = Box::cube(2, -2.0, 2.0);
    return obj;
}

// θ² + 3 sin²θ: non-convex, PL with μ = 1/32.
Objective pl_sine() {
    Objective obj;
    obj.name = "pl_sine";
    obj.dim = 1;
    obj.eval = [](const Vector& x) {
        require_dim(x, 1, "pl_sine");
        const double s = std::sin(x[0]);
        return x[0] * x[0] + 3.0 * s * s;
    };
    obj.grad = [](const Vector& x) -> Vector {
        require_dim(x, 1, "pl_sine");
        Vector g(1);
        g[0] = 2.0 * x[0] + 3.0 * std::sin(2.0 * x[0]);
        return g;
    };
    obj.known_fstar = 0.0;
    obj.known_minimizers = {Vector::Zero(1)};
    obj.shift_c = default_shift(0.0);
    obj.working_box = Box::cube(1, -10.0, 10.0);
    return obj;
}

}  // namespace

double default_shift(double fstar_lower_bound) {
    return fstar_lower_bound >= 0.0 ? 1.0 : 1.0 - fstar_lower_bound;
}

RootView::RootView(const Objective& base) : base_(&base) {
    if (!base.known_fstar) {
        throw PreconditionError("RootView: objective '" + base.name +
                                "' has no known minimum; pass F_star_floor explicitly");
    }
    const double s = *base.known_fstar + base.shift_c;
    if (!(s > 0.0)) {
        throw DomainError("RootView: f* + c <= 0 for objective '" + base.name + "'");
    }
    F_star_floor_ = std::sqrt(s);
}

RootView::RootView(const Objective& base, double F_star_floor)
    : base_(&base), F_star_floor_(F_star_floor) {
    if (!(F_star_floor > 0.0)) throw PreconditionError("RootView: F_star_floor must be > 0");
}

double RootView::value(const Vector& theta) const {
    return checked_root(base_->eval(theta) + base_->shift_c, base_->name);
}

Vector RootView::gradient(const Vector& theta) const { return evaluate(theta).grad_F; }

RootEval RootView::evaluate(const Vector& theta) const {
    RootEval out;
    out.f = base_->eval(theta);
    out.F = checked_root(out.f + base_->shift_c, base_->name);
    out.grad_f = base_->grad(theta);
    out.grad_F = out.grad_f / (2.0 * out.F);
    return out;
}

double F_value(const RootView& view, const Vector& theta) { return view.value(theta); }
Vector F_grad(const RootView& view, const Vector& theta) { return view.gradient(theta); }

Objective make_builtin(std::string_view name) {
    if (name == "rosenbrock2d") return rosenbrock2d();
    if (name == "pl_sine") return pl_sine();
    if (auto n = match_dimensioned(name, "shifted_quadratic")) {
        return shifted_quadratic(*n, std::string(name));
    }
    if (auto n = match_dimensioned(name, "quadratic")) return quadratic(*n, std::string(name));
    if (auto n = match_dimensioned(name, "quartic")) return quartic(*n, std::string(name));
    throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

std::vector<std::string> builtin_names() {
    return {"quadratic", "quadratic_<n>", "rosenbrock2d", "pl_sine",
            "quartic",   "quartic_<n>",   "shifted_quadratic", "shifted_quadratic_<n>"};
}

bool is_builtin(std::string_view name) {
    try {
        (void)make_builtin(name);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

Vector fd_gradient(const std::function<double(const Vector&)>& fn, const Vector& theta,
                   double h) {
    Vector g(theta.size());
    Vector probe = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + h;
        const double up = fn(probe);
        probe[i] = theta[i] - h;
        const double down = fn(probe);
        probe[i] = theta[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double fd_grad_check(const Objective& obj, const Vector& theta, double h) {
    if (!(h > 0.0)) throw PreconditionError("fd_grad_check: h must be > 0");
    const Vector g = obj.grad(theta);
    const Vector fd = fd_gradient(obj.eval, theta, h);
    return (g - fd).lpNorm<Eigen::Infinity>() / (1.0 + g.lpNorm<Eigen::Infinity>());
}

Matrix fd_hessian(const std::function<Vector(const Vector&)>& gradient, const Vector& theta,
                  double h) {
    const auto n = theta.size();
    Matrix H(n, n);
    Vector probe = theta;
    for (Eigen::Index j = 0; j < n; ++j) {
        probe[j] = theta[j] + h;
        const Vector up = gradient(probe);
        probe[j] = theta[j] - h;
        const Vector down = gradient(probe);
        probe[j] = theta[j];
        H.col(j) = (up - down) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

double largest_eigenvalue(const Matrix& sym) {
    const auto n = sym.rows();
    if (n == 0 || sym.cols() != n) throw PreconditionError("largest_eigenvalue: not square");
    if (n == 1) return sym(0, 0);

    // Gershgorin bound; A + ρI is positive semidefinite so the dominant
    // eigenvalue of the shifted matrix is the largest algebraic one of A.
    const double rho = sym.cwiseAbs().rowwise().sum().maxCoeff();
    const Matrix B = sym + rho * Matrix::Identity(n, n);

    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i) / n;
    x.normalize();

    double lambda = x.dot(B * x);
    double residual = 0.0;
    for (int it = 0; it < kPowerIterationCap; ++it) {
        Vector y = B * x;
        const double norm = y.norm();
        if (norm == 0.0) return -rho;
        x = y / norm;
        const double next = x.dot(B * x);
        residual = (B * x - next * x).norm();
        if (std::abs(next - lambda) <= kPowerIterationTol * std::max(1.0, std::abs(next))) {
            return next - rho;
        }
        lambda = next;
    }
    throw ConvergenceError("power iteration did not converge in " +
                               std::to_string(kPowerIterationCap) + " iterations",
                           residual);
}

std::vector<Vector> grid_points(const Box& region, int per_axis) {
    if (region.empty()) throw PreconditionError("grid_points: empty region");
    if (per_axis < 1) throw PreconditionError("grid_points: need at least one point per axis");
    const int n = region.dim();
    std::size_t total = 1;
    for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);

    std::vector<Vector> pts;
    pts.reserve(total);
    std::vector<int> idx(n, 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vector p(n);
        for (int d = 0; d < n; ++d) {
            const double lo = region.lower[d];
            const double hi = region.upper[d];
            p[d] = per_axis == 1 ? 0.5 * (lo + hi)
                                 : lo + (hi - lo) * static_cast<double>(idx[d]) / (per_axis - 1);
        }
        pts.push_back(std::move(p));
        for (int d = 0; d < n; ++d) {
            if (++idx[d] < per_axis) break;
            idx[d] = 0;
        }
    }
    return pts;
}

double hessian_max_eig(const Objective& obj, const Box& region, int samples) {
    if (region.dim() != obj.dim) throw PreconditionError("hessian_max_eig: region dimension");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : grid_points(region, samples)) {
        best = std::max(best, largest_eigenvalue(fd_hessian(obj.grad, p)));
    }
    return best;
}

}  // namespace agem
