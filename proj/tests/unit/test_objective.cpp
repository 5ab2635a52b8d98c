#include <doctest.h>

#include "agem/objective.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace agem;

namespace {

std::vector<std::string> concrete_builtins() {
    std::vector<std::string> out;
    for (const auto& name : builtin_names()) {
        if (name.find('<') == std::string::npos) out.push_back(name);
    }
    out.push_back("quadratic_3");
    out.push_back("quartic_2");
    return out;
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST_CASE("shifted root values") {
    const Objective q = make_builtin("quadratic");
    const Objective s = make_builtin("pl_sine");
    const Objective r = make_builtin("rosenbrock2d");
    CHECK(F_value(RootView(q), vec({1.0})) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(F_value(RootView(s), vec({0.0})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(F_value(RootView(r), vec({1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("shifted root gradient") {
    const Objective q = make_builtin("quadratic");
    CHECK(F_grad(RootView(q), vec({1.0}))(0) == doctest::Approx(1.0 / std::sqrt(2.0)));

    const Objective r = make_builtin("rosenbrock2d");
    const Vector g = F_grad(RootView(r), vec({0.0, 0.0}));
    CHECK(g(0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(g(1) == 0.0);

    for (const auto& name : concrete_builtins()) {
        const Objective obj = make_builtin(name);
        for (const auto& m : obj.known_minimizers) {
            CHECK(F_grad(RootView(obj), m).norm() <= 1e-12);
        }
    }
}

TEST_CASE("root evaluation outside the domain") {
    Objective neg = make_builtin("quadratic");
    neg.shift_c = -4.0;
    CHECK_THROWS_AS(RootView{neg}, DomainError);
    const RootView floored(neg, 1.0);
    CHECK_THROWS_AS(F_value(floored, vec({1.0})), DomainError);
    CHECK(F_value(floored, vec({3.0})) == doctest::Approx(std::sqrt(5.0)));

    Objective unknown = make_builtin("quadratic");
    unknown.known_fstar.reset();
    CHECK_THROWS_AS(RootView{unknown}, PreconditionError);
}

TEST_CASE("default shift") {
    CHECK(default_shift(0.0) == 1.0);
    CHECK(default_shift(2.5) == 1.0);
    CHECK(default_shift(-3.0) == 4.0);
}

TEST_CASE("builtin registry") {
    const Objective s = make_builtin("pl_sine");
    REQUIRE(s.known_fstar);
    CHECK(*s.known_fstar == 0.0);
    REQUIRE(s.known_minimizers.size() == 1);
    CHECK(s.known_minimizers[0].norm() == 0.0);

    const Objective r = make_builtin("rosenbrock2d");
    CHECK(r.dim == 2);
    CHECK(*r.known_fstar == 0.0);
    CHECK((r.known_minimizers[0] - vec({1.0, 1.0})).norm() == 0.0);
    CHECK(r.working_box.contains(vec({-2.0, 2.0})));

    const Objective quartic = make_builtin("quartic");
    CHECK(*quartic.known_fstar == 0.0);
    CHECK(quartic.value(vec({2.0})) == 16.0);

    CHECK(make_builtin("quadratic_3").dim == 3);
    CHECK(is_builtin("quartic_4"));
    CHECK_FALSE(is_builtin("himmelblau"));
    CHECK_THROWS_AS(make_builtin("himmelblau"), std::invalid_argument);
    CHECK_THROWS_AS(make_builtin("quadratic_0"), std::invalid_argument);

    for (const auto& name : concrete_builtins()) {
        const Objective obj = make_builtin(name);
        const Vector x = obj.working_box.lower * 0.3 + obj.working_box.upper * 0.6;
        CHECK(obj.value(x) + obj.shift_c > 0.0);
        REQUIRE(obj.known_fstar);
        CHECK(F_value(RootView(obj), obj.known_minimizers.front()) >= 1.0);
    }
}

TEST_CASE("finite-difference gradient check") {
    CHECK(fd_grad_check(make_builtin("quadratic"), vec({3.0})) <= 1e-8);
    CHECK(fd_grad_check(make_builtin("rosenbrock2d"), vec({0.5, 0.5})) <= 1e-6);
    CHECK(fd_grad_check(make_builtin("pl_sine"), vec({2.0})) <= 1e-6);

    Objective wrong = make_builtin("quadratic");
    wrong.grad = [](const Vector& t) -> Vector { return 3.0 * t; };
    CHECK(fd_grad_check(wrong, vec({1.0})) > 0.1);
}

TEST_CASE("largest eigenvalue") {
    Matrix a(2, 2);
    a << 2.0, 1.0, 1.0, 2.0;
    CHECK(largest_eigenvalue(a) == doctest::Approx(3.0).epsilon(1e-9));
    Matrix n(2, 2);
    n << -5.0, 0.0, 0.0, -1.0;
    CHECK(largest_eigenvalue(n) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("grid points") {
    const auto pts = grid_points(Box::cube(2, -1.0, 1.0), 3);
    CHECK(pts.size() == 9);
    CHECK(pts.front()(0) == -1.0);
    CHECK(pts.back()(1) == 1.0);
    const auto centre = grid_points(Box::cube(1, 0.0, 4.0), 1);
    REQUIRE(centre.size() == 1);
    CHECK(centre[0](0) == 2.0);
}

TEST_CASE("smoothness constant on a box") {
    CHECK(hessian_max_eig(make_builtin("quadratic"), Box::cube(1, -1.0, 1.0), 101) ==
          doctest::Approx(2.0).epsilon(1e-4 / 2.0));
    const double pi = std::numbers::pi;
    CHECK(std::abs(hessian_max_eig(make_builtin("pl_sine"), Box::cube(1, -pi, pi), 2001) - 8.0) <=
          1e-3);
    CHECK(std::abs(hessian_max_eig(make_builtin("quartic"), Box::cube(1, -2.0, 2.0), 401) - 48.0) <=
          1e-2);
}
