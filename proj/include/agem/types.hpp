#pragma once

#include <Eigen/Core>

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace agem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Axis-aligned box [lower, upper] in R^n.
struct Box {
    Vector lower;
    Vector upper;

    static Box cube(int dim, double lo, double hi) {
        return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
    }

    int dim() const { return static_cast<int>(lower.size()); }
    bool empty() const { return lower.size() == 0 || (upper.array() < lower.array()).any(); }
    bool contains(const Vector& p) const {
        return p.size() == lower.size() && (p.array() >= lower.array()).all() &&
               (p.array() <= upper.array()).all();
    }
};

// f(θ) + c ≤ 0, i.e. the shifted root is undefined at the probe point.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A hypothesis of an operation does not hold (bad step size, inadmissible
// parameters, empty grid, ...).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite gradient or state encountered while stepping.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, Vector theta)
        : std::runtime_error(what), theta_(std::move(theta)) {}
    const Vector& theta() const { return theta_; }

private:
    Vector theta_;
};

// An iterative procedure hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace agem
