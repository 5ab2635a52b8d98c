#pragma once

#include "agem/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace agem::gram {

// g(x; θ) = Σ_j a_j tanh(w_j·x + b_j). Parameters are packed as
// [W (row-major, width × input_dim), b (width), a (width)].
struct TwoLayerNet {
    int input_dim = 1;
    int width = 16;

    int param_count() const { return width * (input_dim + 2); }
    void validate() const;

    double predict(const Vector& params, const Vector& x) const;
    // ∂g(x; θ)/∂θ, analytic.
    Vector param_gradient(const Vector& params, const Vector& x) const;
    Vector random_params(std::mt19937_64& rng, double scale = 1.0) const;
};

struct DataPoint {
    Vector x;
    double y = 0.0;
};

inline constexpr std::size_t kMaxDataPoints = 20;

std::vector<DataPoint> random_dataset(std::mt19937_64& rng, std::size_t m, int input_dim);

// Rows are ∂g(x_i)/∂θ.
Matrix jacobian(const TwoLayerNet& net, const Vector& params, const std::vector<DataPoint>& data);
Matrix fd_jacobian(const TwoLayerNet& net, const Vector& params,
                   const std::vector<DataPoint>& data, double h = 1e-6);

// Least-squares loss f = ½ Σ (g(x_i) - y_i)² and its gradient, accumulated
// sample by sample.
double loss(const TwoLayerNet& net, const Vector& params, const std::vector<DataPoint>& data);
Vector loss_gradient(const TwoLayerNet& net, const Vector& params,
                     const std::vector<DataPoint>& data);

struct GramResult {
    Matrix H;  // J Jᵀ, m × m
    Matrix J;
    Vector u;  // residuals g(x_i) - y_i
    Vector grad_f;
    double min_eig = kNaN;
    double half_grad_sq = kNaN;  // ½|∇f|²
    double half_uHu = kNaN;      // ½ uᵀHu
    double identity_residual = kNaN;

    // |½|∇f|² - ½uᵀHu| <= tol (1 + |∇f|²).
    bool identity_holds(double tol = 1e-10) const {
        return identity_residual <= tol * (1.0 + grad_f.squaredNorm());
    }
};

GramResult gram_matrix_pl(const TwoLayerNet& net, const Vector& params,
                          const std::vector<DataPoint>& data);

}  // namespace agem::gram
