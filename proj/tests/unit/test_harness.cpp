#include <doctest.h>

#include "agem/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace agem;
using namespace agem::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("agem_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

const char* kSmall = R"({
  "schema": 1,
  "name": "small",
  "objective": "pl_sine",
  "theta0": [2.0],
  "methods": [
    {"method": "agem", "eta": 0.01, "beta": 0.9},
    {"method": "aegd", "eta": 0.01},
    {"method": "gdm", "eta": 0.01, "beta": 0.5}
  ],
  "budget": 300,
  "diagnostics": ["energy_identity", "summed_bound", "energy_monotonicity"]
})";

}  // namespace

TEST_CASE("checked-in comparison config") {
    const auto cfg = load_config(fs::path(AGEM_TEST_CONFIGS) / "rosenbrock_fig1.json");
    REQUIRE(cfg.methods.size() == 4);
    CHECK(cfg.methods[0].method == optim::Method::agem);
    CHECK(cfg.methods[1].method == optim::Method::sgem);
    CHECK(cfg.methods[2].method == optim::Method::aegd);
    CHECK(cfg.methods[3].method == optim::Method::gdm);
    CHECK(cfg.objective == "rosenbrock2d");
    CHECK(cfg.theta0.size() == 2);
    CHECK(cfg.stop.f_tol == 1e-4);
}

TEST_CASE("config validation") {
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"schema": 1, "objective": "quadratic", "theta0": [1],
                        "methods": [{"method": "adam", "eta": 0.1}]})"),
        doctest::Contains("adam"), ConfigError);

    try {
        parse_config("");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(e.line() >= 1);
        CHECK(e.column() >= 1);
    }

    try {
        parse_config("{\n  \"schema\": 1,\n  \"objective\": ]\n}");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() >= 14);
    }

    CHECK_THROWS_WITH_AS(parse_config(R"({"schema": 1, "objective": "quadratic", "theta0": [1],
                                          "methods": [{"method": "gd", "eta": 0.1}], "colour": 2})"),
                         doctest::Contains("colour"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"schema": 2, "objective": "quadratic", "theta0": [1],
                                          "methods": [{"method": "gd", "eta": 0.1}]})"),
                         doctest::Contains("schema"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"schema": 1, "objective": "quadratic", "theta0": [1, 2],
                                          "methods": [{"method": "gd", "eta": 0.1}]})"),
                         doctest::Contains("theta0"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema": 1, "objective": "quadratic", "theta0": [1],
                                     "methods": [{"method": "agem", "eta": 0.1, "beta": 1.0}]})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schema": 1, "objective": "nope", "theta0": [1],
                                     "methods": [{"method": "gd", "eta": 0.1}]})"),
                    ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"schema": 1, "objective": "quadratic", "theta0": [1],
                                          "study": {"etas": [0.01, 0.02]}})"),
                         doctest::Contains("decreasing"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/agem.json"), ConfigError);
}

TEST_CASE("canonical form and hashing") {
    const auto a = parse_config(kSmall);
    auto b = parse_config(kSmall);
    CHECK(a.canonical() == b.canonical());
    b.methods[0].hyper.eta = 0.02;
    CHECK(a.canonical() != b.canonical());
    CHECK(fnv1a("") == 14695981039346656037ull);
    CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
    CHECK(hex64(0).size() == 16);
}

TEST_CASE("number formatting round trips") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
        CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(kNaN) == "nan");
    CHECK(format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("trajectory tables") {
    const fs::path dir = scratch_dir("tables");
    const auto cols = trajectory_columns(2);
    REQUIRE(cols.size() == 10);
    CHECK(cols[0] == "k_or_t");
    CHECK(cols[1] == "theta_0");
    CHECK(cols[8] == "E_opt");

    const auto t = optim::run(optim::Method::agem, make_builtin("rosenbrock2d"), vec({-1.2, 1.0}),
                              {0.01, 0.9}, {100, 0, 0});
    write_trajectory(t, dir / "agem_rosenbrock2d.csv");
    const auto back = read_trajectory(dir / "agem_rosenbrock2d.csv");
    CHECK(back.label == "agem_rosenbrock2d");
    REQUIRE(back.points.size() == t.points.size());
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        const auto& p = t.points[i];
        const auto& q = back.points[i];
        CHECK(q.time == p.time);
        CHECK(q.theta == p.theta);
        CHECK(q.r == p.r);
        CHECK(q.v_norm == p.v_norm);
        CHECK(q.f == p.f);
        CHECK(q.grad_f_norm == p.grad_f_norm);
        CHECK(q.Q == p.Q);
        CHECK(std::isnan(q.E));
        CHECK(q.identity_residual == p.identity_residual);
    }

    Trajectory empty;
    empty.label = "nothing";
    write_trajectory(empty, dir / "empty.csv");
    CHECK(slurp(dir / "empty.csv").find('\n') == slurp(dir / "empty.csv").size() - 1);
    CHECK_THROWS(read_trajectory(dir / "missing.csv"));
    fs::remove_all(dir);
}

TEST_CASE("experiments are deterministic") {
    const auto cfg = parse_config(kSmall);
    const fs::path a = scratch_dir("det_a");
    const fs::path b = scratch_dir("det_b");
    const auto ma = run_experiment(cfg, a);
    const auto mb = run_experiment(cfg, b);
    CHECK(ma.all_ok());
    CHECK(ma.runs.size() == 3);
    CHECK(ma.content_hash == mb.content_hash);
    CHECK(ma.config_hash == mb.config_hash);
    CHECK(fs::exists(a / "manifest.json"));
    CHECK(fs::exists(a / "report.json"));
    CHECK(fs::exists(a / "agem_pl_sine.csv"));
    for (const auto& f : ma.files) CHECK(fs::exists(a / f));
    CHECK(slurp(a / "agem_pl_sine.csv") == slurp(b / "agem_pl_sine.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("budget zero writes initial states only") {
    auto cfg = parse_config(kSmall);
    cfg.stop.budget = 0;
    const fs::path dir = scratch_dir("budget0");
    const auto m = run_experiment(cfg, dir);
    CHECK(m.all_ok());
    for (const auto& r : m.runs) {
        CHECK(r.steps == 0);
        CHECK(read_trajectory(dir / r.file).points.size() == 1);
    }
    fs::remove_all(dir);
}

TEST_CASE("a diverging run does not take its siblings down") {
    auto cfg = parse_config(R"({
      "schema": 1, "objective": "quadratic", "theta0": [1.0],
      "methods": [{"method": "gd", "eta": 1.5}, {"method": "agem", "eta": 0.05, "beta": 0.5},
                  {"method": "gd", "eta": 0.1}],
      "budget": 2000
    })");
    const fs::path dir = scratch_dir("crash");
    const auto m = run_experiment(cfg, dir);
    REQUIRE(m.runs.size() == 3);
    CHECK_FALSE(m.runs[0].ok);
    CHECK_FALSE(m.runs[0].error.empty());
    CHECK(m.runs[0].steps > 0);
    CHECK(read_trajectory(dir / m.runs[0].file).points.size() >= 2);
    CHECK(m.runs[1].ok);
    CHECK(m.runs[2].ok);
    CHECK(m.runs[0].label != m.runs[2].label);
    CHECK_FALSE(m.all_ok());
    fs::remove_all(dir);
}

TEST_CASE("ODE and study runs") {
    const auto cfg = parse_config(R"({
      "schema": 1, "objective": "pl_sine", "theta0": [2.0],
      "ode": {"system": "agem_limit", "epsilon": 0.05, "T": 2.0, "dt": 1e-3},
      "study": {"epsilon": 0.05, "T": 1.0, "etas": [0.02, 0.01, 0.005]},
      "diagnostics": ["lyapunov_decay", "ode_bounds"]
    })");
    const fs::path dir = scratch_dir("ode");
    const auto m = run_experiment(cfg, dir);
    CHECK(m.all_ok());
    REQUIRE(m.runs.size() == 2);
    const std::string report = slurp(dir / "report.json");
    CHECK(report.find("ratio") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("comparison summary") {
    auto cfg = parse_config(kSmall);
    cfg.stop.f_tol = 1e-3;
    cfg.stop.budget = 5000;
    const fs::path dir = scratch_dir("cmp");
    const auto m = run_experiment(cfg, dir);
    const auto rows = comparison_summary(m, cfg);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.reached);
        CHECK(r.final_gap <= 1e-3);
        CHECK(r.iterations > 0);
    }
    fs::remove_all(dir);
}

TEST_CASE("every checked-in config loads") {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(AGEM_TEST_CONFIGS)) {
        if (entry.path().extension() != ".json") continue;
        CHECK_NOTHROW(load_config(entry.path()));
        ++count;
    }
    CHECK(count >= 2);
}
