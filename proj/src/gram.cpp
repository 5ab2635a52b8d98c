#include "agem/gram.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace agem::gram {

namespace {

void check_inputs(const TwoLayerNet& net, const Vector& params,
                  const std::vector<DataPoint>& data) {
    net.validate();
    if (params.size() != net.param_count()) {
        throw PreconditionError("gram: expected " + std::to_string(net.param_count()) +
                                " parameters, got " + std::to_string(params.size()));
    }
    if (data.empty()) throw PreconditionError("gram: empty dataset");
    if (data.size() > kMaxDataPoints) {
        throw PreconditionError("gram: at most " + std::to_string(kMaxDataPoints) +
                                " data points are supported");
    }
    for (const auto& d : data) {
        if (d.x.size() != net.input_dim) throw PreconditionError("gram: input dimension mismatch");
    }
}

}  // namespace

void TwoLayerNet::validate() const {
    if (input_dim < 1 || width < 1) {
        throw PreconditionError("TwoLayerNet: input_dim and width must be >= 1");
    }
}

double TwoLayerNet::predict(const Vector& params, const Vector& x) const {
    const int nw = width * input_dim;
    double g = 0.0;
    for (int j = 0; j < width; ++j) {
        const double z = params.segment(j * input_dim, input_dim).dot(x) + params[nw + j];
        g += params[nw + width + j] * std::tanh(z);
    }
    return g;
}

Vector TwoLayerNet::param_gradient(const Vector& params, const Vector& x) const {
    const int nw = width * input_dim;
    Vector out(param_count());
    for (int j = 0; j < width; ++j) {
        const double z = params.segment(j * input_dim, input_dim).dot(x) + params[nw + j];
        const double t = std::tanh(z);
        const double a = params[nw + width + j];
        const double dz = a * (1.0 - t * t);
        out.segment(j * input_dim, input_dim) = dz * x;
        out[nw + j] = dz;
        out[nw + width + j] = t;
    }
    return out;
}

Vector TwoLayerNet::random_params(std::mt19937_64& rng, double scale) const {
    std::normal_distribution<double> normal(0.0, scale);
    Vector p(param_count());
    for (auto& x : p) x = normal(rng);
    return p;
}

std::vector<DataPoint> random_dataset(std::mt19937_64& rng, std::size_t m, int input_dim) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<DataPoint> data(m);
    for (auto& d : data) {
        d.x.resize(input_dim);
        for (auto& x : d.x) x = unif(rng);
        d.y = unif(rng);
    }
    return data;
}

Matrix jacobian(const TwoLayerNet& net, const Vector& params, const std::vector<DataPoint>& data) {
    check_inputs(net, params, data);
    Matrix J(static_cast<Eigen::Index>(data.size()), net.param_count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        J.row(static_cast<Eigen::Index>(i)) = net.param_gradient(params, data[i].x).transpose();
    }
    return J;
}

Matrix fd_jacobian(const TwoLayerNet& net, const Vector& params,
                   const std::vector<DataPoint>& data, double h) {
    check_inputs(net, params, data);
    Matrix J(static_cast<Eigen::Index>(data.size()), net.param_count());
    Vector probe = params;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            probe[k] = params[k] + h;
            const double up = net.predict(probe, data[i].x);
            probe[k] = params[k] - h;
            const double down = net.predict(probe, data[i].x);
            J(static_cast<Eigen::Index>(i), k) = (up - down) / (2.0 * h);
        }
        probe[k] = params[k];
    }
    return J;
}

double loss(const TwoLayerNet& net, const Vector& params, const std::vector<DataPoint>& data) {
    check_inputs(net, params, data);
    double f = 0.0;
    for (const auto& d : data) {
        const double u = net.predict(params, d.x) - d.y;
        f += 0.5 * u * u;
    }
    return f;
}

Vector loss_gradient(const TwoLayerNet& net, const Vector& params,
                     const std::vector<DataPoint>& data) {
    check_inputs(net, params, data);
    Vector g = Vector::Zero(net.param_count());
    for (const auto& d : data) {
        g += (net.predict(params, d.x) - d.y) * net.param_gradient(params, d.x);
    }
    return g;
}

GramResult gram_matrix_pl(const TwoLayerNet& net, const Vector& params,
                          const std::vector<DataPoint>& data) {
    GramResult out;
    out.J = jacobian(net, params, data);
    out.H = out.J * out.J.transpose();
    out.u.resize(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.u[static_cast<Eigen::Index>(i)] = net.predict(params, data[i].x) - data[i].y;
    }
    out.grad_f = loss_gradient(net, params, data);

    Eigen::SelfAdjointEigenSolver<Matrix> solver(out.H, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("gram: symmetric eigensolve failed", kNaN);
    }
    out.min_eig = solver.eigenvalues().minCoeff();
    out.half_grad_sq = 0.5 * out.grad_f.squaredNorm();
    out.half_uHu = 0.5 * out.u.dot(out.H * out.u);
    out.identity_residual = std::abs(out.half_grad_sq - out.half_uHu);
    return out;
}

}  // namespace agem::gram
