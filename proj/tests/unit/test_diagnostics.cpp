#include <doctest.h>

#include "agem/diagnostics.hpp"
#include "agem/dynamics.hpp"
#include "agem/optim.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace agem;
using namespace agem::diagnostics;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

// Samples of f and |∇f| at log-spaced points approaching 0 from above.
Trajectory sampled_descent(const Objective& obj, double from, double to, int n) {
    Trajectory t;
    t.label = obj.name;
    for (int i = 0; i < n; ++i) {
        const double x = from * std::pow(to / from, static_cast<double>(i) / (n - 1));
        TrajectoryPoint p;
        p.time = i;
        p.theta = vec({x});
        p.f = obj.value(p.theta);
        p.grad_f_norm = obj.gradient(p.theta).norm();
        t.points.push_back(p);
    }
    t.steps = n - 1;
    return t;
}

}  // namespace

TEST_CASE("energy identity residual by hand") {
    const double r0 = std::sqrt(2.0);
    const double r1 = std::sqrt(2.0) / 1.1;
    CHECK(std::abs(energy_identity_residual(r0, vec({1.0}), r1, vec({9.0 / 11.0}), 0.1)) <= 1e-15);
    CHECK(energy_identity_residual(0.7, vec({0.3}), 0.7, vec({0.3}), 0.1) == 0.0);
    CHECK(std::abs(energy_identity_residual(r0, vec({1.0}), r1, vec({9.0 / 11.0 + 1e-3}), 0.1)) >
          1e-8);
}

TEST_CASE("energy checks on real and corrupted runs") {
    const Objective obj = make_builtin("rosenbrock2d");
    for (auto m : {optim::Method::aegd, optim::Method::sgem, optim::Method::agem}) {
        const double beta = m == optim::Method::aegd ? 0.0 : 0.9;
        const auto t = optim::run(m, obj, vec({-1.2, 1.0}), {0.01, beta}, {2000, 0, 0});
        CHECK(energy_identity_check(t, 0.01).passed);
        CHECK(summed_bound_check(t, 0.01).passed);
        CHECK(energy_monotonicity_check(t, 0.01).passed);
    }

    auto t = optim::run(optim::Method::agem, obj, vec({-1.2, 1.0}), {0.01, 0.9}, {200, 0, 0});
    auto bad = t;
    bad.points[50].theta(0) += 1e-3;
    const Verdict v = energy_identity_check(bad, 0.01);
    CHECK_FALSE(v.passed);
    CHECK(v.slack < 0.0);
    CHECK(v.at == doctest::Approx(50.0).epsilon(0.05));

    auto up = t;
    up.points[80].r = up.points[79].r * 1.01;
    CHECK_FALSE(energy_monotonicity_check(up, 0.01).passed);

    auto jump = t;
    for (std::size_t i = 100; i < jump.points.size(); ++i) jump.points[i].theta(1) += 5.0;
    CHECK_FALSE(summed_bound_check(jump, 0.01).passed);

    const auto sub = optim::run(optim::Method::agem, obj, vec({-1.2, 1.0}), {0.01, 0.9},
                                {200, 0, 0}, {10, 1e12});
    CHECK_THROWS_AS(summed_bound_check(sub, 0.01), PreconditionError);
}

TEST_CASE("Lyapunov function") {
    const Objective q = make_builtin("quadratic");
    const RootView view(q);
    CHECK(lyapunov_Q(view, vec({1.0}), 3.0, vec({0.0}), 0.4) == doctest::Approx(std::sqrt(2.0)));
    CHECK(lyapunov_Q(view, vec({1.0}), std::sqrt(2.0), vec({1.0 / std::sqrt(2.0)}), 0.1) ==
          doctest::Approx(1.05 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("Q decay check") {
    const auto t = optim::run(optim::Method::agem, make_builtin("pl_sine"), vec({2.0}),
                              {0.01, 0.9}, {3000, 0, 0});
    CHECK(lyapunov_decay_check(t, 1e-8).passed);
    auto bad = t;
    bad.points[10].Q += 1e-2;
    CHECK_FALSE(lyapunov_decay_check(bad, 1e-8).passed);
}

TEST_CASE("ODE bound stack") {
    const Objective s = make_builtin("pl_sine");
    const RootView view(s);
    dynamics::OdeSystem sys{dynamics::SystemKind::agem_limit, 0.5, 0.0, &view};
    const auto t = dynamics::integrate_rk4(sys, dynamics::OdeState::initial(view, vec({2.0})),
                                           20.0, 1e-3);
    CHECK(ode_bounds_check(t, view, 0.5).passed);
    auto bad = t;
    bad.points[100].r = 2.0 * t.front().r;
    CHECK_FALSE(ode_bounds_check(bad, view, 0.5).passed);
}

TEST_CASE("epsilon thresholds") {
    const double F0 = std::sqrt(4.0 + 3.0 * std::pow(std::sin(2.0), 2) + 1.0);
    const auto th = epsilon_thresholds(1.0 / 32.0, 8.0, F0, 1.0, 0.8, 0.5);
    CHECK(th.eps1 == doctest::Approx(0.25 / (16.0 * F0)).epsilon(1e-14));
    CHECK(th.eps2 ==
          doctest::Approx(1.5 * 0.5 * (F0 + 0.8 / F0) / (2.0 / 32.0 * F0)).epsilon(1e-14));
    CHECK(th.min() == th.eps1);
    CHECK(epsilon_thresholds(1.0 / 32.0, 8.0, F0, 1.0, 0.8, 0.0).eps1 == 0.0);
    CHECK(epsilon_thresholds(1.0 / 32.0, 8.0, F0, 1.0, 0.8, 1.0).eps1 == 0.0);
    CHECK(epsilon_thresholds(1.0 / 32.0, 8.0, F0, 1.0, 0.8, 0.3).eps1 ==
          doctest::Approx(epsilon_thresholds(1.0 / 32.0, 8.0, F0, 1.0, 0.8, 0.7).eps1));
}

TEST_CASE("control function") {
    const Objective s = make_builtin("pl_sine");
    const RootView view(s);
    const Vector theta0 = vec({2.0});
    const double F0 = F_value(view, theta0);
    const auto p = ControlParams::admissible(0.5, 1e-3, 1.0 / 32.0, 8.0, 0.8, F0, 1.0);
    CHECK(p.is_admissible());
    CHECK(p.a == doctest::Approx(1e-3 / 32.0 / (F0 * 1.5)));
    CHECK(p.lambda == doctest::Approx(0.5 / F0));
    CHECK(control_E(view, theta0, vec({0.0}), F0, p, 0.0) ==
          doctest::Approx(p.a * s.value(theta0)));
    CHECK(control_E(view, vec({0.0}), vec({0.0}), 0.9, p, 0.0) == 0.0);

    auto big = ControlParams::admissible(0.5, 1.0, 1.0 / 32.0, 8.0, 0.8, F0, 1.0);
    CHECK_FALSE(big.is_admissible());
    CHECK_FALSE(big.admissibility_violation().empty());
}

TEST_CASE("PL constant on a grid") {
    CHECK(pl_constant_estimate(make_builtin("pl_sine"), Box::cube(1, -10.0, 10.0), 10000) >=
          1.0 / 32.0 - 1e-9);
    CHECK(std::abs(pl_constant_estimate(make_builtin("quadratic"), Box::cube(1, -3.0, 3.0), 101) -
                   2.0) <= 1e-9);
    const double coarse = pl_constant_estimate(make_builtin("quartic"), Box::cube(1, -1.0, 1.0), 101);
    const double fine = pl_constant_estimate(make_builtin("quartic"), Box::cube(1, -1.0, 1.0), 1001);
    CHECK(fine < coarse);
    CHECK(fine < 1e-3);
}

TEST_CASE("line and rate fits") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    const std::vector<double> y{1, 3, 5, 7, 9};
    const auto l = fit_line(x, y);
    CHECK(l.slope == doctest::Approx(2.0));
    CHECK(l.intercept == doctest::Approx(1.0));
    CHECK(l.rsq == doctest::Approx(1.0));

    std::vector<double> t, e, p;
    for (int i = 0; i < 50; ++i) {
        t.push_back(0.1 * i);
        e.push_back(3.0 * std::exp(-1.7 * 0.1 * i));
        p.push_back(2.0 * std::pow(0.1 * i + 1.0, -0.5));
    }
    const auto fe = fit_exponential(t, e);
    CHECK(fe.rate_or_exponent == doctest::Approx(1.7));
    CHECK(fe.prefactor == doctest::Approx(3.0));
    const auto fp = fit_power(t, p);
    CHECK(fp.rate_or_exponent == doctest::Approx(-0.5));
    CHECK(fp.prefactor == doctest::Approx(2.0));
}

TEST_CASE("Lojasiewicz exponent fits") {
    const auto q = lojasiewicz_fit(sampled_descent(make_builtin("quadratic"), 0.09, 1e-5, 200), 0.0);
    CHECK(std::abs(q.alpha - 0.5) <= 0.02);
    const auto k = lojasiewicz_fit(sampled_descent(make_builtin("quartic"), 0.3, 2e-3, 200), 0.0);
    CHECK(std::abs(k.alpha - 0.25) <= 0.02);
    CHECK(k.c == doctest::Approx(4.0).epsilon(1e-6));
    const auto s = lojasiewicz_fit(sampled_descent(make_builtin("pl_sine"), 0.04, 1e-6, 200), 0.0);
    CHECK(std::abs(s.alpha - 0.5) <= 0.05);

    Trajectory empty;
    CHECK_THROWS_AS(lojasiewicz_fit(empty, 0.0), PreconditionError);
}

TEST_CASE("rate bound") {
    const Objective s = make_builtin("pl_sine");
    const RootView view(s);
    const Vector theta0 = vec({2.0});
    const double F0 = F_value(view, theta0);
    const double mu = 1.0 / 32.0;
    const double L = 8.0;
    // r* from a first pass; the bound only gets weaker for a smaller r*.
    const double eps_guess = 0.9 * epsilon_thresholds(mu, L, F0, 1.0, 0.5, 0.5).min();
    dynamics::OdeSystem sys{dynamics::SystemKind::agem_limit, eps_guess, 0.0, &view};
    const auto first = dynamics::integrate(sys, dynamics::OdeState::initial(view, theta0), 50.0,
                                           eps_guess / 10.0);
    const double r_star = 0.99 * measured_r_star(first);
    const auto params = ControlParams::admissible(0.5, eps_guess, mu, L, r_star, F0, 1.0);
    REQUIRE(params.is_admissible());
    const Verdict v = rate_bound_check(first, params, 0.0);
    CHECK(v.passed);
    CHECK(v.slack >= 0.0);

    const auto wide = ControlParams::admissible(0.5, 10.0 * params.thresholds().min(), mu, L,
                                                r_star, F0, 1.0);
    CHECK_THROWS_AS(rate_bound_check(first, wide, 0.0), PreconditionError);

    auto moved = first;
    moved.points.front().v = vec({0.1});
    CHECK_THROWS_AS(rate_bound_check(moved, params, 0.0), PreconditionError);
}

TEST_CASE("theta convergence rates") {
    const Objective q = make_builtin("quadratic");
    const RootView view(q);
    dynamics::OdeSystem sys{dynamics::SystemKind::agem_limit, 0.05, 0.0, &view};
    const auto t = dynamics::integrate_rk4(sys, dynamics::OdeState::initial(view, vec({1.0})), 20.0,
                                           1e-3);
    const auto r = theta_rate_check(t, vec({0.0}), 0.5);
    CHECK(r.passed);
    CHECK_FALSE(r.vacuous);
    CHECK(r.fit.model == RateModel::exponential);
    CHECK(r.fit.rate_or_exponent > 0.0);
    CHECK(r.fit.rsq >= 0.99);

    const auto still = dynamics::integrate_rk4(
        sys, dynamics::OdeState::initial(view, vec({0.0})), 1.0, 1e-3);
    const auto z = theta_rate_check(still, vec({0.0}), 0.5);
    CHECK(z.vacuous);
    CHECK(z.passed);

    Trajectory tiny;
    for (int i = 0; i < 3; ++i) {
        TrajectoryPoint p;
        p.time = i;
        p.theta = vec({std::pow(0.01, i)});
        tiny.points.push_back(p);
    }
    CHECK_THROWS_AS(theta_rate_check(tiny, vec({0.0}), 0.5), PreconditionError);
}

TEST_CASE("step-size threshold probe") {
    const Objective q = make_builtin("quadratic");
    const auto p = eta_star_probe(q, vec({1.0}), Box::cube(1, -5.0, 5.0), 401);
    CHECK(p.eta1_hat > 0.0);
    CHECK(std::isfinite(p.eta1_hat));
    CHECK(p.eta3_hat > 0.0);
    CHECK(std::isfinite(p.eta3_hat));
    CHECK(p.sigma3_points >= p.sigma2_points);
    CHECK(p.r0 == doctest::Approx(std::sqrt(2.0)));

    CHECK_THROWS_AS(eta_star_probe(q, vec({1.0}), Box::cube(1, 3.0, 5.0), 101), PreconditionError);

    Objective scaled = q;
    scaled.name = "scaled";
    scaled.shift_c = 4.0;
    scaled.eval = [](const Vector& t) { return 4.0 * t.squaredNorm(); };
    scaled.grad = [](const Vector& t) -> Vector { return 8.0 * t; };
    const auto s = eta_star_probe(scaled, vec({1.0}), Box::cube(1, -5.0, 5.0), 401);
    CHECK(s.r0 == doctest::Approx(2.0 * p.r0));
    CHECK(s.eta3_hat / p.eta3_hat == doctest::Approx(0.25).epsilon(1e-3));
}
