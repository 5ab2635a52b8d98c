#include "agem/harness.hpp"

#include "agem/diagnostics.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#ifndef AGEM_VERSION
#define AGEM_VERSION "0.0.0"
#endif
#ifndef AGEM_CONFIG_DIR
#define AGEM_CONFIG_DIR "configs"
#endif

namespace agem::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- config parsing -------------------------------------------------------

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    for (const auto& item : obj.items()) {
        if (std::none_of(keys.begin(), keys.end(),
                         [&](const char* k) { return item.key() == k; })) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

const json& require(const json& obj, const std::string& where, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing field '" + where + "." + key + "'");
    return *it;
}

double number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError("field '" + field + "' must be a number");
    return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& field) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        throw ConfigError("field '" + field + "' must be an integer");
    }
    return j.get<std::int64_t>();
}

std::string text(const json& j, const std::string& field) {
    if (!j.is_string()) throw ConfigError("field '" + field + "' must be a string");
    return j.get<std::string>();
}

Vector point(const json& j, const std::string& field) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (!j.is_array() || j.empty()) {
        throw ConfigError("field '" + field + "' must be a number or a non-empty array");
    }
    Vector p(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        p[static_cast<Eigen::Index>(i)] = number(j[i], field + "[" + std::to_string(i) + "]");
    }
    return p;
}

template <class Fn>
auto named(const std::string& field, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

MethodSpec parse_method_spec(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
    allow_keys(j, where, {"method", "eta", "beta"});
    MethodSpec m;
    const std::string id = text(require(j, where, "method"), where + ".method");
    m.method = named(where + ".method", [&] { return optim::parse_method(id); });
    if (j.contains("eta")) m.hyper.eta = number(j["eta"], where + ".eta");
    if (j.contains("beta")) m.hyper.beta = number(j["beta"], where + ".beta");
    named(where, [&] {
        m.hyper.validate();
        return 0;
    });
    return m;
}

OdeSpec parse_ode(const json& j) {
    if (!j.is_object()) throw ConfigError("'ode' must be an object");
    allow_keys(j, "ode", {"system", "epsilon", "eta", "T", "dt", "integrator"});
    OdeSpec o;
    if (j.contains("system")) {
        const std::string id = text(j["system"], "ode.system");
        o.kind = named("ode.system", [&] { return dynamics::parse_system_kind(id); });
    }
    if (j.contains("epsilon")) o.epsilon = number(j["epsilon"], "ode.epsilon");
    if (j.contains("eta")) o.eta = number(j["eta"], "ode.eta");
    if (j.contains("T")) o.T = number(j["T"], "ode.T");
    if (j.contains("dt")) o.dt = number(j["dt"], "ode.dt");
    if (j.contains("integrator")) {
        const std::string id = text(j["integrator"], "ode.integrator");
        o.integrator = named("ode.integrator", [&] { return dynamics::parse_integrator(id); });
    }
    if (!(o.dt > 0.0)) throw ConfigError("field 'ode.dt' must be > 0");
    if (!(o.T >= 0.0)) throw ConfigError("field 'ode.T' must be >= 0");
    if (o.kind != dynamics::SystemKind::gradient_flow && !(o.epsilon > 0.0)) {
        throw ConfigError("field 'ode.epsilon' must be > 0");
    }
    return o;
}

StudySpec parse_study(const json& j) {
    if (!j.is_object()) throw ConfigError("'study' must be an object");
    allow_keys(j, "study", {"epsilon", "T", "etas"});
    StudySpec s;
    if (j.contains("epsilon")) s.epsilon = number(j["epsilon"], "study.epsilon");
    if (j.contains("T")) s.T = number(j["T"], "study.T");
    const json& etas = require(j, "study", "etas");
    if (!etas.is_array() || etas.empty()) {
        throw ConfigError("field 'study.etas' must be a non-empty array");
    }
    for (std::size_t i = 0; i < etas.size(); ++i) {
        const std::string field = "study.etas[" + std::to_string(i) + "]";
        s.etas.push_back(number(etas[i], field));
        if (!(s.etas.back() > 0.0)) throw ConfigError("field '" + field + "' must be > 0");
        if (i > 0 && !(s.etas[i] < s.etas[i - 1])) {
            throw ConfigError("field 'study.etas' must be strictly decreasing");
        }
    }
    if (!(s.epsilon > 0.0)) throw ConfigError("field 'study.epsilon' must be > 0");
    if (!(s.T > 0.0)) throw ConfigError("field 'study.T' must be > 0");
    return s;
}

DiagnosticSpec parse_diagnostic(const json& j, const std::string& where) {
    DiagnosticSpec d;
    if (j.is_string()) {
        d.name = j.get<std::string>();
    } else if (j.is_object()) {
        d.name = text(require(j, where, "name"), where + ".name");
        for (const auto& item : j.items()) {
            if (item.key() == "name") continue;
            d.params[item.key()] = number(item.value(), where + "." + item.key());
        }
    } else {
        throw ConfigError("'" + where + "' must be a name or an object with a name");
    }
    const auto& known = diagnostic_names();
    if (std::find(known.begin(), known.end(), d.name) == known.end()) {
        throw ConfigError("unknown diagnostic '" + d.name + "' in " + where);
    }
    return d;
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1;
    int column = 1;
    const std::size_t end = std::min(byte, text.size());
    // nlohmann reports the position just past the offending character.
    for (std::size_t i = 0; i + 1 < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

json verdict_json(const diagnostics::Verdict& v) {
    return {{"passed", v.passed}, {"slack", v.slack}, {"at", v.at}, {"detail", v.detail}};
}

// Non-finite doubles become null in JSON.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json point_json(const Vector& p) {
    json a = json::array();
    for (double x : p) a.push_back(num(x));
    return a;
}

// ---- experiment jobs ------------------------------------------------------

struct JobOutput {
    RunRecord record;
    json report;
    std::vector<std::string> failed_checks;
};

RootView view_for(const Objective& obj) {
    return obj.known_fstar ? RootView(obj) : RootView(obj, 1.0);
}

void apply_optimizer_diagnostics(const ExperimentConfig& cfg, const MethodSpec& m,
                                 const Objective& obj, const Trajectory& traj, JobOutput& out) {
    json checks = json::object();
    const bool energy = optim::is_energy_method(m.method);
    for (const auto& d : cfg.diagnostics) {
        try {
            if (d.name == "lojasiewicz") {
                if (!obj.known_fstar) continue;
                const auto fit = diagnostics::lojasiewicz_fit(
                    traj, *obj.known_fstar, d.param("lo", diagnostics::kLojasiewiczLow),
                    d.param("hi", diagnostics::kLojasiewiczHigh));
                checks[d.name] = {{"alpha", fit.alpha}, {"c", fit.c}, {"rsq", fit.rsq},
                                  {"samples", fit.samples}};
                continue;
            }
            if (!energy || traj.empty()) continue;
            diagnostics::Verdict v;
            if (d.name == "energy_identity") {
                v = diagnostics::energy_identity_check(traj, m.hyper.eta, d.param("rel_tol", 1e-12));
            } else if (d.name == "summed_bound") {
                v = diagnostics::summed_bound_check(traj, m.hyper.eta, d.param("rel_tol", 1e-12));
            } else if (d.name == "energy_monotonicity") {
                v = diagnostics::energy_monotonicity_check(traj, m.hyper.eta);
            } else if (d.name == "lyapunov_decay") {
                v = diagnostics::lyapunov_decay_check(traj, d.param("tol", 1e-8));
            } else {
                continue;
            }
            checks[d.name] = verdict_json(v);
            if (!v.passed) out.failed_checks.push_back(traj.label + ": " + d.name);
        } catch (const std::exception& e) {
            checks[d.name] = {{"error", e.what()}};
            out.failed_checks.push_back(traj.label + ": " + d.name + " (" + e.what() + ")");
        }
    }
    out.report["diagnostics"] = checks;
}

JobOutput run_optimizer_job(const ExperimentConfig& cfg, const MethodSpec& m,
                            const std::string& label, const fs::path& dir) {
    JobOutput out;
    const Objective obj = make_builtin(cfg.objective);
    optim::RunOptions opts;
    opts.record_every = cfg.record_every;
    Trajectory traj = optim::run(m.method, obj, cfg.theta0, m.hyper, cfg.stop, opts);
    traj.label = label;

    RunRecord& rec = out.record;
    rec.label = traj.label;
    rec.kind = "optimizer";
    rec.file = traj.label + ".csv";
    rec.steps = traj.steps;
    rec.ok = traj.ok();
    if (traj.failure) rec.error = *traj.failure;
    if (!traj.empty()) {
        rec.final_f = traj.back().f;
        rec.final_grad_norm = traj.back().grad_f_norm;
    }
    if (cfg.stop.f_tol > 0.0 && obj.known_fstar) {
        rec.reached_target = rec.final_f - *obj.known_fstar <= cfg.stop.f_tol;
    }
    write_trajectory(traj, dir / rec.file);

    out.report = {{"label", rec.label},
                  {"method", std::string(optim::method_name(m.method))},
                  {"eta", m.hyper.eta},
                  {"beta", m.hyper.beta},
                  {"epsilon", m.hyper.epsilon()},
                  {"steps", rec.steps},
                  {"ok", rec.ok},
                  {"error", rec.error},
                  {"file", rec.file},
                  {"final_f", num(rec.final_f)},
                  {"final_grad_norm", num(rec.final_grad_norm)}};
    if (!traj.empty()) {
        out.report["final_theta"] = point_json(traj.back().theta);
        out.report["final_r"] = num(traj.back().r);
    }
    if (rec.reached_target) out.report["reached_target"] = *rec.reached_target;
    apply_optimizer_diagnostics(cfg, m, obj, traj, out);
    return out;
}

JobOutput run_ode_job(const ExperimentConfig& cfg, const fs::path& dir) {
    JobOutput out;
    const OdeSpec& o = *cfg.ode;
    const Objective obj = make_builtin(cfg.objective);
    const RootView view = view_for(obj);
    dynamics::OdeSystem sys;
    sys.kind = o.kind;
    sys.epsilon = o.epsilon;
    sys.eta = o.eta;
    sys.view = &view;
    const Trajectory traj =
        dynamics::integrate(sys, dynamics::OdeState::initial(view, cfg.theta0), o.T, o.dt,
                            o.integrator);

    RunRecord& rec = out.record;
    rec.label = traj.label;
    rec.kind = "ode";
    rec.file = traj.label + ".csv";
    rec.steps = traj.steps;
    rec.ok = traj.ok();
    if (traj.failure) rec.error = *traj.failure;
    if (!traj.empty()) {
        rec.final_f = traj.back().f;
        rec.final_grad_norm = traj.back().grad_f_norm;
    }
    write_trajectory(traj, dir / rec.file);

    out.report = {{"label", rec.label},
                  {"system", std::string(dynamics::system_kind_name(o.kind))},
                  {"epsilon", o.epsilon},
                  {"eta", o.eta},
                  {"T", o.T},
                  {"dt", o.dt},
                  {"integrator", std::string(dynamics::integrator_name(o.integrator))},
                  {"ok", rec.ok},
                  {"error", rec.error},
                  {"file", rec.file},
                  {"final_f", num(rec.final_f)},
                  {"final_grad_norm", num(rec.final_grad_norm)}};

    json checks = json::object();
    const double eps = sys.uses_epsilon() ? o.epsilon : 0.0;
    for (const auto& d : cfg.diagnostics) {
        try {
            diagnostics::Verdict v;
            if (d.name == "lyapunov_decay") {
                v = diagnostics::lyapunov_decay_check(traj, d.param("tol", 1e-8));
            } else if (d.name == "ode_bounds") {
                v = diagnostics::ode_bounds_check(traj, view, eps, d.param("rel_tol", 1e-9));
            } else if (d.name == "gradient_flow_equivalence") {
                if (o.kind != dynamics::SystemKind::gradient_flow) continue;
                double defect = 0.0;
                for (const auto& p : traj.points) {
                    defect = std::max(defect, std::abs(p.r - view.value(p.theta)));
                }
                const double tol = d.param("tol", 1e-6);
                v.passed = defect <= tol;
                v.slack = tol - defect;
                v.detail = "max |r - F(theta)| = " + format_number(defect);
            } else {
                continue;
            }
            checks[d.name] = verdict_json(v);
            if (!v.passed) out.failed_checks.push_back(traj.label + ": " + d.name);
        } catch (const std::exception& e) {
            checks[d.name] = {{"error", e.what()}};
            out.failed_checks.push_back(traj.label + ": " + d.name + " (" + e.what() + ")");
        }
    }
    out.report["diagnostics"] = checks;
    return out;
}

JobOutput run_study_job(const ExperimentConfig& cfg, const fs::path& dir) {
    JobOutput out;
    const StudySpec& s = *cfg.study;
    RunRecord& rec = out.record;
    rec.label = "consistency_" + cfg.objective;
    rec.kind = "study";
    rec.file = rec.label + ".csv";
    try {
        const Objective obj = make_builtin(cfg.objective);
        const auto study = dynamics::consistency_study(obj, cfg.theta0, s.epsilon, s.T, s.etas);
        std::ofstream os(dir / rec.file);
        if (!os) throw std::runtime_error("cannot write " + (dir / rec.file).string());
        os << "eta,beta,steps,error,ratio\n";
        json rows = json::array();
        for (const auto& r : study.rows) {
            os << format_number(r.eta) << ',' << format_number(r.beta) << ',' << r.steps << ','
               << format_number(r.error) << ',' << format_number(r.ratio) << '\n';
            rows.push_back({{"eta", r.eta}, {"beta", r.beta}, {"steps", r.steps},
                            {"error", r.error}, {"ratio", num(r.ratio)}});
        }
        rec.steps = static_cast<std::int64_t>(study.rows.size());
        const bool decreasing = study.strictly_decreasing();
        const bool first_order = study.ratios_within(1.5, 3.0);
        out.report = {{"label", rec.label},
                      {"epsilon", s.epsilon},
                      {"T", s.T},
                      {"reference_dt", study.reference_dt},
                      {"richardson_change", study.richardson_change},
                      {"rows", rows},
                      {"strictly_decreasing", decreasing},
                      {"ratios_in_1.5_3.0", first_order},
                      {"file", rec.file}};
        if (!decreasing) out.failed_checks.push_back(rec.label + ": errors not decreasing");
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        rec.file.clear();
        out.report = {{"label", rec.label}, {"ok", false}, {"error", rec.error}};
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

const std::vector<std::string>& diagnostic_names() {
    static const std::vector<std::string> names = {
        "energy_identity", "summed_bound", "energy_monotonicity",      "lyapunov_decay",
        "lojasiewicz",     "ode_bounds",   "gradient_flow_equivalence"};
    return names;
}

std::string ExperimentConfig::canonical() const {
    json j;
    j["schema"] = schema;
    j["name"] = name;
    j["objective"] = objective;
    j["theta0"] = point_json(theta0);
    json ms = json::array();
    for (const auto& m : methods) {
        ms.push_back({{"method", std::string(optim::method_name(m.method))},
                      {"eta", m.hyper.eta},
                      {"beta", m.hyper.beta}});
    }
    j["methods"] = ms;
    j["budget"] = stop.budget;
    j["stop"] = {{"grad_tol", stop.grad_tol}, {"f_tol", stop.f_tol}};
    j["record_every"] = record_every;
    if (ode) {
        j["ode"] = {{"system", std::string(dynamics::system_kind_name(ode->kind))},
                    {"epsilon", ode->epsilon},
                    {"eta", ode->eta},
                    {"T", ode->T},
                    {"dt", ode->dt},
                    {"integrator", std::string(dynamics::integrator_name(ode->integrator))}};
    }
    if (study) j["study"] = {{"epsilon", study->epsilon}, {"T", study->T}, {"etas", study->etas}};
    json ds = json::array();
    for (const auto& d : diagnostics) ds.push_back({{"name", d.name}, {"params", d.params}});
    j["diagnostics"] = ds;
    j["seed"] = seed;
    return j.dump();
}

ExperimentConfig parse_config(std::string_view source, std::string_view origin) {
    json root;
    try {
        root = json::parse(source.begin(), source.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(source, e.byte);
        throw ConfigError(std::string(origin) + ":" + std::to_string(line) + ":" +
                              std::to_string(column) + ": parse error: " + e.what(),
                          line, column);
    }
    if (!root.is_object()) throw ConfigError(std::string(origin) + ": top level must be an object");

    allow_keys(root, "config",
               {"schema", "name", "notes", "objective", "theta0", "methods", "budget", "stop",
                "record_every", "ode", "study", "diagnostics", "seed", "output"});

    ExperimentConfig cfg;
    cfg.schema = static_cast<int>(integer(require(root, "config", "schema"), "schema"));
    if (cfg.schema != kSchemaVersion) {
        throw ConfigError("unsupported schema " + std::to_string(cfg.schema) + " (this build reads " +
                          std::to_string(kSchemaVersion) + ")");
    }
    if (root.contains("name")) cfg.name = text(root["name"], "name");
    if (root.contains("notes")) cfg.notes = text(root["notes"], "notes");

    const json& objective = require(root, "config", "objective");
    if (objective.is_object()) {
        allow_keys(objective, "objective", {"name"});
        cfg.objective = text(require(objective, "objective", "name"), "objective.name");
    } else {
        cfg.objective = text(objective, "objective");
    }
    if (!is_builtin(cfg.objective)) {
        throw ConfigError("field 'objective': unknown objective '" + cfg.objective + "'");
    }
    const int dim = make_builtin(cfg.objective).dim;

    cfg.theta0 = point(require(root, "config", "theta0"), "theta0");
    if (cfg.theta0.size() != dim) {
        throw ConfigError("field 'theta0' has " + std::to_string(cfg.theta0.size()) +
                          " entries; objective '" + cfg.objective + "' has dimension " +
                          std::to_string(dim));
    }

    if (root.contains("methods")) {
        const json& ms = root["methods"];
        if (!ms.is_array()) throw ConfigError("field 'methods' must be an array");
        for (std::size_t i = 0; i < ms.size(); ++i) {
            cfg.methods.push_back(parse_method_spec(ms[i], "methods[" + std::to_string(i) + "]"));
        }
    }
    if (root.contains("budget")) cfg.stop.budget = integer(root["budget"], "budget");
    if (cfg.stop.budget < 0) throw ConfigError("field 'budget' must be >= 0");
    if (root.contains("stop")) {
        const json& s = root["stop"];
        if (!s.is_object()) throw ConfigError("field 'stop' must be an object");
        allow_keys(s, "stop", {"grad_tol", "f_tol"});
        if (s.contains("grad_tol")) cfg.stop.grad_tol = number(s["grad_tol"], "stop.grad_tol");
        if (s.contains("f_tol")) cfg.stop.f_tol = number(s["f_tol"], "stop.f_tol");
    }
    if (root.contains("record_every")) {
        cfg.record_every = integer(root["record_every"], "record_every");
        if (cfg.record_every < 1) throw ConfigError("field 'record_every' must be >= 1");
    }
    if (root.contains("ode")) cfg.ode = parse_ode(root["ode"]);
    if (root.contains("study")) cfg.study = parse_study(root["study"]);
    if (root.contains("diagnostics")) {
        const json& ds = root["diagnostics"];
        if (!ds.is_array()) throw ConfigError("field 'diagnostics' must be an array");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            cfg.diagnostics.push_back(
                parse_diagnostic(ds[i], "diagnostics[" + std::to_string(i) + "]"));
        }
    }
    if (root.contains("seed")) {
        const std::int64_t seed = integer(root["seed"], "seed");
        if (seed < 0) throw ConfigError("field 'seed' must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    if (root.contains("output")) cfg.output = text(root["output"], "output");
    if (cfg.methods.empty() && !cfg.ode && !cfg.study) {
        throw ConfigError("config defines no methods, ode or study to run");
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    auto [ptr, ec] = std::to_chars(buf, buf + 16, h, 16);
    (void)ec;
    std::string s(buf, ptr);
    return std::string(16 - s.size(), '0') + s;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<std::string> trajectory_columns(int dim) {
    std::vector<std::string> cols{"k_or_t"};
    for (int i = 0; i < dim; ++i) cols.push_back("theta_" + std::to_string(i));
    for (const char* c : {"r", "v_norm", "f", "grad_f_norm", "Q", "E_opt", "identity_residual"}) {
        cols.emplace_back(c);
    }
    return cols;
}

void write_trajectory(const Trajectory& traj, const fs::path& path) {
    const int dim = traj.empty() ? 0 : static_cast<int>(traj.front().theta.size());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write trajectory to " + path.string());
    const auto cols = trajectory_columns(dim);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& p : traj.points) {
        os << format_number(p.time);
        for (double x : p.theta) os << ',' << format_number(x);
        for (double x : {p.r, p.v_norm, p.f, p.grad_f_norm, p.Q, p.E, p.identity_residual}) {
            os << ',' << format_number(x);
        }
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

Trajectory read_trajectory(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read trajectory " + path.string());
    Trajectory traj;
    traj.label = path.stem().string();

    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path.string() + ": missing header");
    const auto header_cols = std::count(line.begin(), line.end(), ',') + 1;
    const int dim = static_cast<int>(header_cols) - 8;
    if (dim < 0) throw std::runtime_error(path.string() + ": malformed header");
    std::string expected;
    for (const auto& c : trajectory_columns(dim)) expected += (expected.empty() ? "" : ",") + c;
    if (line != expected) throw std::runtime_error(path.string() + ": unexpected header");

    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> values;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            char* end = nullptr;
            const double x = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": bad number '" + cell + "'");
            }
            values.push_back(x);
        }
        if (static_cast<long>(values.size()) != header_cols) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": wrong number of columns");
        }
        TrajectoryPoint p;
        p.time = values[0];
        p.theta.resize(dim);
        for (int i = 0; i < dim; ++i) p.theta[i] = values[1 + i];
        std::size_t c = 1 + dim;
        p.r = values[c++];
        p.v_norm = values[c++];
        p.f = values[c++];
        p.grad_f_norm = values[c++];
        p.Q = values[c++];
        p.E = values[c++];
        p.identity_residual = values[c++];
        traj.points.push_back(std::move(p));
    }
    if (!traj.empty()) traj.steps = static_cast<std::int64_t>(traj.back().time);
    return traj;
}

bool RunManifest::all_ok() const {
    return failed_checks.empty() &&
           std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok; });
}

RunManifest run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
    fs::create_directories(out_dir);

    using Clock = std::chrono::steady_clock;
    auto timed = [](auto&& job) {
        const auto t0 = Clock::now();
        JobOutput out;
        try {
            out = job();
        } catch (const std::exception& e) {
            out.record.ok = false;
            out.record.error = e.what();
            out.report = {{"ok", false}, {"error", e.what()}};
        }
        out.record.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        return out;
    };

    // Repeated methods get a numeric suffix so every run owns its file.
    std::map<std::string, int> uses;
    std::vector<std::future<JobOutput>> jobs;
    for (const auto& m : config.methods) {
        std::string label = std::string(optim::method_name(m.method)) + "_" + config.objective;
        if (const int n = ++uses[label]; n > 1) label += "_" + std::to_string(n);
        jobs.push_back(std::async(std::launch::async, [&, m, label] {
            return timed([&] { return run_optimizer_job(config, m, label, out_dir); });
        }));
    }
    if (config.ode) {
        jobs.push_back(std::async(std::launch::async, [&] {
            return timed([&] { return run_ode_job(config, out_dir); });
        }));
    }
    if (config.study) {
        jobs.push_back(std::async(std::launch::async, [&] {
            return timed([&] { return run_study_job(config, out_dir); });
        }));
    }

    RunManifest manifest;
    manifest.version = version();
    manifest.directory = out_dir;
    manifest.config_hash = hex64(fnv1a(config.canonical()));

    json report;
    report["experiment"] = config.name;
    report["objective"] = config.objective;
    report["config_hash"] = manifest.config_hash;
    report["config"] = json::parse(config.canonical());
    if (!config.notes.empty()) report["notes"] = config.notes;
    report["optimizer_runs"] = json::array();
    std::set<std::string> seen_files;
    for (auto& job : jobs) {
        JobOutput out = job.get();
        const std::string kind = out.record.kind;
        if (kind == "ode") {
            report["ode"] = out.report;
        } else if (kind == "study") {
            report["study"] = out.report;
        } else {
            report["optimizer_runs"].push_back(out.report);
        }
        if (!out.record.file.empty() && seen_files.insert(out.record.file).second &&
            fs::exists(out_dir / out.record.file)) {
            manifest.files.push_back(out.record.file);
        }
        for (auto& f : out.failed_checks) manifest.failed_checks.push_back(std::move(f));
        manifest.runs.push_back(std::move(out.record));
    }

    if (config.stop.f_tol > 0.0 && !config.methods.empty()) {
        json summary = json::array();
        for (const auto& row : comparison_summary(manifest, config)) {
            summary.push_back({{"label", row.label},
                               {"iterations", row.iterations},
                               {"reached", row.reached},
                               {"final_gap", num(row.final_gap)}});
        }
        report["comparison"] = summary;
    }
    report["failed_checks"] = manifest.failed_checks;
    write_file(out_dir / "report.json", report.dump(2) + "\n");
    manifest.files.push_back("report.json");

    std::vector<std::string> sorted = manifest.files;
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = fnv1a(manifest.config_hash);
    for (const auto& f : sorted) {
        h = fnv1a(f, h);
        h = fnv1a(read_file(out_dir / f), h);
    }
    manifest.content_hash = hex64(h);

    json m;
    m["version"] = manifest.version;
    m["config_hash"] = manifest.config_hash;
    m["content_hash"] = manifest.content_hash;
    m["files"] = manifest.files;
    m["runs"] = json::array();
    for (const auto& r : manifest.runs) {
        json jr = {{"label", r.label}, {"kind", r.kind},   {"file", r.file},
                   {"steps", r.steps}, {"ok", r.ok},       {"error", r.error},
                   {"wall_seconds", r.wall_seconds}};
        if (r.reached_target) jr["reached_target"] = *r.reached_target;
        m["runs"].push_back(jr);
    }
    m["failed_checks"] = manifest.failed_checks;
    write_file(out_dir / "manifest.json", m.dump(2) + "\n");
    return manifest;
}

std::vector<ComparisonRow> comparison_summary(const RunManifest& manifest,
                                              const ExperimentConfig& config) {
    const Objective obj = make_builtin(config.objective);
    const double fstar = obj.known_fstar.value_or(0.0);
    std::vector<ComparisonRow> rows;
    for (const auto& r : manifest.runs) {
        if (r.kind != "optimizer") continue;
        ComparisonRow row;
        row.label = r.label;
        row.iterations = r.steps;
        row.final_gap = r.final_f - fstar;
        row.reached = r.ok && r.reached_target.value_or(false);
        rows.push_back(row);
    }
    return rows;
}

std::string version() { return AGEM_VERSION; }

fs::path config_dir() {
    if (const char* env = std::getenv("AGEM_CONFIG_DIR"); env && *env) return env;
    return AGEM_CONFIG_DIR;
}

}  // namespace agem::harness
