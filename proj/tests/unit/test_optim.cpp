#include <doctest.h>

#include "agem/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace agem;
using namespace agem::optim;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("method identifiers") {
    CHECK(parse_method("agem") == Method::agem);
    CHECK(method_name(Method::gdm) == "gdm");
    CHECK(is_energy_method(Method::sgem));
    CHECK_FALSE(is_energy_method(Method::gd));
    CHECK_THROWS_AS(parse_method("adam"), std::invalid_argument);
}

TEST_CASE("hyperparameter validation") {
    CHECK_NOTHROW(Hyper{0.1, 0.9}.validate());
    CHECK_THROWS_AS((Hyper{0.0, 0.5}).validate(), PreconditionError);
    CHECK_THROWS_AS((Hyper{0.1, 1.0}).validate(), PreconditionError);
    CHECK_THROWS_AS((Hyper{0.1, -0.1}).validate(), PreconditionError);
    CHECK(Hyper{0.1, 0.9}.epsilon() == doctest::Approx(0.9));
}

TEST_CASE("first AGEM step on the quadratic by hand") {
    const Objective q = make_builtin("quadratic");
    const RootView view(q);
    const auto s0 = AgemState::start(view, vec({1.0}), {0.1, 0.0});
    CHECK(s0.r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(s0.v.norm() == 0.0);

    const auto s1 = agem_step(s0, view);
    CHECK(s1.k == 1);
    CHECK(s1.v(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(std::abs(s1.r - std::sqrt(2.0) / 1.1) <= 1e-15);
    CHECK(std::abs(s1.theta(0) - 9.0 / 11.0) <= 1e-15);

    const auto a1 = aegd_step(s0, view);
    CHECK(a1.theta(0) == s1.theta(0));
    CHECK(a1.r == s1.r);
}

TEST_CASE("AEGD is AGEM with zero momentum, bit for bit") {
    const Objective obj = make_builtin("rosenbrock2d");
    const auto a = run(Method::aegd, obj, vec({-1.2, 1.0}), {0.005, 0.0}, {500, 0, 0});
    const auto b = run(Method::agem, obj, vec({-1.2, 1.0}), {0.005, 0.0}, {500, 0, 0});
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK((a.points[i].theta - b.points[i].theta).norm() == 0.0);
        CHECK(a.points[i].r == b.points[i].r);
    }
}

TEST_CASE("first SGEM step equals the first AEGD step") {
    const Objective q = make_builtin("quadratic");
    const RootView view(q);
    const auto s1 = sgem_step(SgemState::start(view, vec({1.0}), {0.1, 0.9}), view);
    CHECK(s1.m(0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(s1.v(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(std::abs(s1.theta(0) - 9.0 / 11.0) <= 1e-14);
    CHECK(std::abs(s1.r - std::sqrt(2.0) / 1.1) <= 1e-14);

    const auto z = run(Method::sgem, q, vec({1.5}), {0.05, 0.0}, {50, 0, 0});
    const auto e = run(Method::aegd, q, vec({1.5}), {0.05, 0.0}, {50, 0, 0});
    CHECK(std::abs(z.back().theta(0) - e.back().theta(0)) <= 1e-14);
}

TEST_CASE("stationary starts stay put") {
    const Objective s = make_builtin("pl_sine");
    const RootView view(s);
    const Vector zero = vec({0.0});
    const auto a = agem_step(AgemState::start(view, zero, {0.1, 0.9}), view);
    CHECK(a.theta(0) == 0.0);
    CHECK(a.r == 1.0);
    CHECK(a.k == 1);
    const auto b = aegd_step(AgemState::start(view, zero, {0.1, 0.0}), view);
    CHECK(b.theta(0) == 0.0);
    CHECK(b.r == 1.0);
    const auto c = sgem_step(SgemState::start(view, zero, {0.1, 0.5}), view);
    CHECK(c.theta(0) == 0.0);
    CHECK(c.r == 1.0);
}

TEST_CASE("AEGD energy decreases on pl_sine") {
    const auto t = run(Method::aegd, make_builtin("pl_sine"), vec({1.0}), {0.1, 0.0}, {100, 0, 0});
    REQUIRE(t.points.size() == 101);
    int strict = 0;
    for (std::size_t i = 1; i < t.points.size(); ++i) {
        const double vv = t.points[i].v_norm * t.points[i].v_norm;
        CHECK(t.points[i].r <= t.points[i - 1].r);
        // r can only move when 2η|v|² survives the addition to 1.
        if (2.0 * 0.1 * vv > 4.0 * std::numeric_limits<double>::epsilon()) {
            CHECK(t.points[i].r < t.points[i - 1].r);
            ++strict;
        }
    }
    CHECK(strict >= 10);
}

TEST_CASE("gradient descent and heavy ball") {
    const Objective q = make_builtin("quadratic");
    const auto g1 = gd_step(HeavyBallState::start(vec({1.0}), {0.1, 0.0}), q);
    CHECK(g1.theta(0) == doctest::Approx(0.8).epsilon(1e-15));

    auto s = HeavyBallState::start(vec({1.0}), {0.4, 0.0});
    for (int k = 1; k <= 10; ++k) {
        s = gd_step(s, q);
        CHECK(s.theta(0) == doctest::Approx(std::pow(0.2, k)).epsilon(1e-12));
    }

    const auto a = run(Method::gd, q, vec({2.0}), {0.1, 0.0}, {40, 0, 0});
    const auto b = run(Method::gdm, q, vec({2.0}), {0.1, 0.0}, {40, 0, 0});
    CHECK(a.back().theta(0) == b.back().theta(0));

    const auto m1 = gdm_step(gdm_step(HeavyBallState::start(vec({1.0}), {0.1, 0.5}), q), q);
    // u1 = -0.2, θ1 = 0.8; u2 = -0.1 - 0.16, θ2 = 0.54
    CHECK(m1.theta(0) == doctest::Approx(0.54).epsilon(1e-15));
}

TEST_CASE("run bookkeeping and stopping rules") {
    const Objective q = make_builtin("quadratic");
    const auto zero = run(Method::agem, q, vec({1.0}), {0.1, 0.9}, {0, 0, 0});
    CHECK(zero.points.size() == 1);
    CHECK(zero.steps == 0);
    CHECK(zero.ok());

    const auto stopped = run(Method::agem, q, vec({1.0}), {0.1, 0.5}, {100000, 1e-10, 0});
    CHECK(stopped.ok());
    CHECK(stopped.steps < 100000);
    CHECK(stopped.back().grad_f_norm <= 1e-10);

    const auto ftol = run(Method::gd, q, vec({1.0}), {0.1, 0.0}, {100000, 0, 1e-6});
    CHECK(ftol.back().f <= 1e-6);
    CHECK(ftol.steps < 100);

    const auto sub = run(Method::agem, q, vec({1.0}), {0.1, 0.5}, {95, 0, 0}, {10, 1e12});
    CHECK(sub.steps == 95);
    CHECK(sub.points.size() == 11);
    CHECK(sub.back().time == 95.0);

    const auto first = stopped.front();
    CHECK(first.Q == doctest::Approx(std::sqrt(2.0)));
    CHECK(first.v_norm == 0.0);
}

TEST_CASE("Q is recorded for the energy methods") {
    const auto t = run(Method::agem, make_builtin("pl_sine"), vec({2.0}), {0.01, 0.9}, {200, 0, 0});
    const double eps = Hyper{0.01, 0.9}.epsilon();
    const RootView view(make_builtin("pl_sine"));
    for (std::size_t i = 1; i < t.points.size(); i += 37) {
        const auto& p = t.points[i];
        const double F = std::sqrt(p.f + 1.0);
        CHECK(p.Q == doctest::Approx(F + eps * p.r * p.v_norm * p.v_norm).epsilon(1e-13));
    }
    const auto g = run(Method::gd, make_builtin("pl_sine"), vec({2.0}), {0.01, 0.0}, {5, 0, 0});
    CHECK(std::isnan(g.back().Q));
}

TEST_CASE("divergence is reported, not thrown") {
    const Objective q = make_builtin("quadratic");
    const auto t = run(Method::gd, q, vec({1.0}), {1.5, 0.0}, {1000, 0, 0});
    CHECK_FALSE(t.ok());
    CHECK(t.steps < 1000);
    CHECK(t.points.size() >= 2);

    Objective bad = q;
    bad.grad = [](const Vector& x) -> Vector {
        return x(0) < 0.5 ? Vector::Constant(1, std::numeric_limits<double>::quiet_NaN())
                          : Vector(2.0 * x);
    };
    const auto n = run(Method::agem, bad, vec({1.0}), {0.1, 0.0}, {100, 0, 0});
    CHECK_FALSE(n.ok());
    CHECK(n.points.size() >= 2);

    CHECK_THROWS_AS(run(Method::agem, q, vec({1.0, 2.0}), {0.1, 0.0}, {10, 0, 0}),
                    PreconditionError);
    CHECK_THROWS(run(Method::agem, q, vec({1.0}), {-0.1, 0.0}, {10, 0, 0}));
}

TEST_CASE("non-finite gradient inside a step carries theta") {
    Objective bad = make_builtin("quadratic");
    bad.grad = [](const Vector&) -> Vector {
        return Vector::Constant(1, std::numeric_limits<double>::infinity());
    };
    const RootView view(bad);
    auto s = AgemState::start(view, vec({0.25}), {0.1, 0.0});
    try {
        agem_step(s, view);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.theta()(0) == 0.25);
    }
}
