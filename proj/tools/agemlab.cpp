// agemlab: command-line front end for the optimizer lab.
//
// Precedence for every setting: command-line flag > config file > default.
// The default output directory comes from $AGEM_OUTPUT_DIR, else ./agem_out.

#include "agem/harness.hpp"
#include "agem/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using agem::harness::ExperimentConfig;
namespace fs = std::filesystem;

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path default_output() {
    if (const char* env = std::getenv("AGEM_OUTPUT_DIR"); env && *env) return env;
    return "agem_out";
}

// Flags shared by the experiment-style subcommands.
struct Common {
    std::string config;
    std::string objective;
    std::vector<double> theta0;
    std::string output;

    CLI::Option* objective_opt = nullptr;
    CLI::Option* theta0_opt = nullptr;
    CLI::Option* output_opt = nullptr;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "experiment config file (JSON)");
        objective_opt = app->add_option("--objective", objective, "builtin objective name");
        theta0_opt = app->add_option("--theta0", theta0, "start point, comma separated")
                         ->delimiter(',')
                         ->allow_extra_args(false);
        output_opt = app->add_option("-o,--output", output, "output directory");
    }

    ExperimentConfig base() const {
        ExperimentConfig cfg;
        if (!config.empty()) {
            cfg = agem::harness::load_config(config);
        }
        if (objective_opt->count() > 0) {
            if (!agem::is_builtin(objective)) throw UsageError("unknown objective '" + objective + "'");
            cfg.objective = objective;
        }
        if (cfg.objective.empty()) throw UsageError("no objective given (--objective or --config)");
        if (theta0_opt->count() > 0) {
            cfg.theta0 = Eigen::Map<const agem::Vector>(theta0.data(),
                                                       static_cast<Eigen::Index>(theta0.size()));
        }
        const int dim = agem::make_builtin(cfg.objective).dim;
        if (cfg.theta0.size() == 0) throw UsageError("no start point given (--theta0 or --config)");
        if (cfg.theta0.size() != dim) {
            throw UsageError("--theta0 has " + std::to_string(cfg.theta0.size()) +
                             " entries, objective '" + cfg.objective + "' needs " +
                             std::to_string(dim));
        }
        return cfg;
    }

    fs::path out_dir(const ExperimentConfig& cfg) const {
        if (output_opt->count() > 0) return output;
        if (!cfg.output.empty()) return cfg.output;
        return default_output();
    }
};

void print_manifest(const agem::harness::RunManifest& m) {
    std::printf("output: %s\n", m.directory.string().c_str());
    for (const auto& r : m.runs) {
        std::printf("  %-28s %-9s steps=%-8lld %s", r.label.c_str(), r.kind.c_str(),
                    static_cast<long long>(r.steps), r.ok ? "ok" : "FAILED");
        if (r.kind != "study") {
            std::printf("  f=%s  |grad f|=%s", agem::harness::format_number(r.final_f).c_str(),
                        agem::harness::format_number(r.final_grad_norm).c_str());
        }
        if (!r.ok) std::printf("  (%s)", r.error.c_str());
        std::printf("\n");
    }
    for (const auto& f : m.failed_checks) std::printf("  failed check: %s\n", f.c_str());
    std::printf("content hash: %s\n", m.content_hash.c_str());
}

int finish(const agem::harness::RunManifest& m) {
    print_manifest(m);
    return m.all_ok() ? 0 : kExitFailed;
}

void print_comparison(const std::vector<agem::verify::Fig1Row>& rows, double f_tol) {
    std::printf("%-8s %10s %8s %12s  %s\n", "method", "eta", "beta", "iterations", "final f - f*");
    for (const auto& r : rows) {
        const std::string its = r.reached ? std::to_string(r.iterations)
                                          : ">" + std::to_string(r.iterations);
        std::printf("%-8s %10g %8g %12s  %.3e\n", r.label.c_str(), r.eta, r.beta, its.c_str(),
                    r.final_gap);
    }
    std::printf("target: f - f* <= %g\n", f_tol);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agemlab: energy-adaptive gradient methods, their ODE limits and diagnostics"};
    app.set_version_flag("--version", agem::harness::version());
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run one optimizer on one objective");
    Common run_common;
    run_common.attach(run);
    std::string method;
    double eta = 0.1, beta = 0.0, grad_tol = 0.0, f_tol = 0.0;
    std::int64_t steps = 1000, record_every = 1;
    auto* method_opt = run->add_option("--method", method, "aegd, sgem, agem, gd or gdm");
    auto* eta_opt = run->add_option("--eta", eta, "step size");
    auto* beta_opt = run->add_option("--beta", beta, "momentum in [0, 1)");
    auto* steps_opt = run->add_option("--steps", steps, "step budget");
    auto* grad_opt = run->add_option("--grad-tol", grad_tol, "stop when |grad f| <= tol");
    auto* ftol_opt = run->add_option("--f-tol", f_tol, "stop when f - f* <= tol");
    auto* every_opt = run->add_option("--record-every", record_every, "store every n-th step");

    // ode
    auto* ode = app.add_subcommand("ode", "integrate one continuous-time system");
    Common ode_common;
    ode_common.attach(ode);
    std::string system = "agem_limit", integrator = "auto";
    double epsilon = 0.1, ode_eta = 0.0, T = 10.0, dt = 1e-3;
    auto* system_opt = ode->add_option("--system", system, "agem_limit, high_resolution or gradient_flow");
    auto* eps_opt = ode->add_option("--epsilon", epsilon, "momentum time scale");
    auto* ode_eta_opt = ode->add_option("--eta", ode_eta, "step size of the high-resolution terms");
    auto* T_opt = ode->add_option("--T", T, "final time");
    auto* dt_opt = ode->add_option("--dt", dt, "time step");
    auto* integ_opt = ode->add_option("--integrator", integrator, "auto, rk4 or split");

    // compare
    auto* compare = app.add_subcommand("compare", "run every method of a config and summarise");
    Common cmp_common;
    cmp_common.attach(compare);
    std::int64_t cmp_budget = 0;
    double cmp_ftol = 0.0;
    auto* cmp_budget_opt = compare->add_option("--steps", cmp_budget, "step budget per method");
    auto* cmp_ftol_opt = compare->add_option("--f-tol", cmp_ftol, "target f - f*");

    // verify
    auto* verify = app.add_subcommand("verify", "run the invariant and acceptance suite");
    bool acceptance_only = false;
    std::string verify_report;
    verify->add_flag("--acceptance-only", acceptance_only, "skip the extra module invariants");
    verify->add_option("--report", verify_report, "also write the results as JSON");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "discrete-to-continuous consistency study");
    Common sweep_common;
    sweep_common.attach(sweep);
    double sweep_eps = 0.05, sweep_T = 1.0;
    std::vector<double> etas;
    auto* sweep_eps_opt = sweep->add_option("--epsilon", sweep_eps, "fixed momentum time scale");
    auto* sweep_T_opt = sweep->add_option("--T", sweep_T, "horizon");
    auto* etas_opt = sweep->add_option("--etas", etas, "decreasing step sizes, comma separated")
                         ->delimiter(',');

    // fig1
    auto* fig1 = app.add_subcommand("fig1", "Rosenbrock comparison from the checked-in config");
    std::string fig1_config;
    std::string fig1_output;
    auto* fig1_out_opt = fig1->add_option("-o,--output", fig1_output, "output directory");
    fig1->add_option("-c,--config", fig1_config, "override the comparison config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) {
            ExperimentConfig cfg = run_common.base();
            agem::harness::MethodSpec spec;
            if (!cfg.methods.empty()) spec = cfg.methods.front();
            if (method_opt->count() > 0) {
                try {
                    spec.method = agem::optim::parse_method(method);
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            } else if (cfg.methods.empty()) {
                throw UsageError("no method given (--method or --config)");
            }
            if (eta_opt->count() > 0) spec.hyper.eta = eta;
            if (beta_opt->count() > 0) spec.hyper.beta = beta;
            cfg.methods = {spec};
            cfg.ode.reset();
            cfg.study.reset();
            if (steps_opt->count() > 0) cfg.stop.budget = steps;
            if (grad_opt->count() > 0) cfg.stop.grad_tol = grad_tol;
            if (ftol_opt->count() > 0) cfg.stop.f_tol = f_tol;
            if (every_opt->count() > 0) cfg.record_every = record_every;
            if (cfg.stop.budget < 0 || cfg.record_every < 1) {
                throw UsageError("--steps must be >= 0 and --record-every >= 1");
            }
            spec.hyper.validate();
            return finish(agem::harness::run_experiment(cfg, run_common.out_dir(cfg)));
        }

        if (ode->parsed()) {
            ExperimentConfig cfg = ode_common.base();
            agem::harness::OdeSpec spec = cfg.ode.value_or(agem::harness::OdeSpec{});
            try {
                if (system_opt->count() > 0) spec.kind = agem::dynamics::parse_system_kind(system);
                if (integ_opt->count() > 0) spec.integrator = agem::dynamics::parse_integrator(integrator);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            if (eps_opt->count() > 0) spec.epsilon = epsilon;
            if (ode_eta_opt->count() > 0) spec.eta = ode_eta;
            if (T_opt->count() > 0) spec.T = T;
            if (dt_opt->count() > 0) spec.dt = dt;
            cfg.ode = spec;
            cfg.methods.clear();
            cfg.study.reset();
            return finish(agem::harness::run_experiment(cfg, ode_common.out_dir(cfg)));
        }

        if (compare->parsed()) {
            ExperimentConfig cfg = cmp_common.base();
            if (cfg.methods.empty()) throw UsageError("compare needs a config listing methods");
            if (cmp_budget_opt->count() > 0) cfg.stop.budget = cmp_budget;
            if (cmp_ftol_opt->count() > 0) cfg.stop.f_tol = cmp_ftol;
            const auto manifest = agem::harness::run_experiment(cfg, cmp_common.out_dir(cfg));
            print_comparison(agem::verify::fig1_rows(cfg), cfg.stop.f_tol);
            return finish(manifest);
        }

        if (verify->parsed()) {
            std::vector<agem::verify::CheckResult> results;
            if (!acceptance_only) results = agem::verify::invariant_suite();
            for (auto& r : agem::verify::acceptance_suite()) results.push_back(std::move(r));
            int failed = 0;
            nlohmann::json report = nlohmann::json::array();
            for (const auto& r : results) {
                std::printf("%s\n", agem::verify::format_line(r).c_str());
                if (!r.ok()) ++failed;
                report.push_back({{"id", r.id},
                                  {"name", r.name},
                                  {"passed", r.ok()},
                                  {"margin", r.margin},
                                  {"seconds", r.seconds},
                                  {"detail", r.detail}});
            }
            std::printf("%zu checks, %d failed\n", results.size(), failed);
            if (!verify_report.empty()) {
                std::ofstream os(verify_report);
                if (!os) throw std::runtime_error("cannot write " + verify_report);
                os << report.dump(2) << "\n";
            }
            return failed == 0 ? 0 : kExitFailed;
        }

        if (sweep->parsed()) {
            ExperimentConfig cfg = sweep_common.base();
            agem::harness::StudySpec spec = cfg.study.value_or(agem::harness::StudySpec{});
            if (sweep_eps_opt->count() > 0) spec.epsilon = sweep_eps;
            if (sweep_T_opt->count() > 0) spec.T = sweep_T;
            if (etas_opt->count() > 0) spec.etas = etas;
            if (spec.etas.empty()) throw UsageError("no step sizes given (--etas or --config)");
            for (std::size_t i = 0; i < spec.etas.size(); ++i) {
                if (!(spec.etas[i] > 0.0) || (i > 0 && !(spec.etas[i] < spec.etas[i - 1]))) {
                    throw UsageError("--etas must be positive and strictly decreasing");
                }
            }
            cfg.study = spec;
            cfg.methods.clear();
            cfg.ode.reset();
            const auto manifest = agem::harness::run_experiment(cfg, sweep_common.out_dir(cfg));
            const auto table = manifest.directory / ("consistency_" + cfg.objective + ".csv");
            if (fs::exists(table)) {
                std::ifstream is(table);
                std::cout << is.rdbuf();
            }
            return finish(manifest);
        }

        if (fig1->parsed()) {
            const fs::path path = fig1_config.empty()
                                      ? agem::harness::config_dir() / "rosenbrock_fig1.json"
                                      : fs::path(fig1_config);
            const ExperimentConfig cfg = agem::harness::load_config(path);
            fs::path out = fig1_out_opt->count() > 0 ? fs::path(fig1_output)
                           : !cfg.output.empty()     ? fs::path(cfg.output)
                                                     : default_output();
            const auto manifest = agem::harness::run_experiment(cfg, out);
            const auto rows = agem::verify::fig1_rows(cfg);
            print_comparison(rows, cfg.stop.f_tol);
            const auto order = agem::verify::fig1_ordering(rows);
            std::printf("%s: %s\n", order.passed ? "ordering reproduced" : "ordering NOT reproduced",
                        order.detail.c_str());
            const int status = finish(manifest);
            return order.passed ? status : kExitFailed;
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "agemlab: %s\n", e.what());
        return kExitUsage;
    } catch (const agem::harness::ConfigError& e) {
        std::fprintf(stderr, "agemlab: config: %s\n", e.what());
        return kExitUsage;
    } catch (const agem::PreconditionError& e) {
        std::fprintf(stderr, "agemlab: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "agemlab: %s\n", e.what());
        return kExitFailed;
    }
    return kExitUsage;
}
