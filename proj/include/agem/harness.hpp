#pragma once

#include "agem/dynamics.hpp"
#include "agem/optim.hpp"
#include "agem/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agem::harness {

inline constexpr int kSchemaVersion = 1;

// Parse failures carry a 1-based line and column; validation failures name
// the offending field and leave both at 0.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(what), line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

struct MethodSpec {
    optim::Method method = optim::Method::agem;
    optim::Hyper hyper;
};

struct OdeSpec {
    dynamics::SystemKind kind = dynamics::SystemKind::agem_limit;
    double epsilon = 0.1;
    double eta = 0.0;
    double T = 10.0;
    double dt = 1e-3;
    dynamics::Integrator integrator = dynamics::Integrator::automatic;
};

// Consistency study: AGEM at fixed ε against the limit ODE.
struct StudySpec {
    double epsilon = 0.05;
    double T = 1.0;
    std::vector<double> etas;
};

struct DiagnosticSpec {
    std::string name;
    std::map<std::string, double> params;

    double param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

// Names accepted in the "diagnostics" list.
const std::vector<std::string>& diagnostic_names();

struct ExperimentConfig {
    int schema = kSchemaVersion;
    std::string name = "experiment";
    std::string notes;
    std::string objective;
    Vector theta0;
    std::vector<MethodSpec> methods;
    optim::StopRule stop;
    std::int64_t record_every = 1;
    std::optional<OdeSpec> ode;
    std::optional<StudySpec> study;
    std::vector<DiagnosticSpec> diagnostics;
    std::uint64_t seed = 0;
    std::string output;

    // Canonical serialization; the input of the config hash.
    std::string canonical() const;
};

ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t h);

// Round-trip exact (17 significant digits); NaN is written as "nan".
std::string format_number(double x);

std::vector<std::string> trajectory_columns(int dim);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
// Inverse of write_trajectory. The dimension is taken from the header; the
// label from the file stem. Full v vectors are not stored.
Trajectory read_trajectory(const std::filesystem::path& path);

struct RunRecord {
    std::string label;
    std::string kind;  // "optimizer", "ode" or "study"
    std::string file;  // relative to the output directory; may be empty
    std::int64_t steps = 0;
    bool ok = true;
    std::string error;
    double final_f = kNaN;
    double final_grad_norm = kNaN;
    double wall_seconds = 0.0;
    // Optimizer runs with an f_tol stop rule: whether it was met.
    std::optional<bool> reached_target;
};

struct RunManifest {
    std::string version;
    std::string config_hash;
    // Hash over the bytes of every written output file except the manifest.
    std::string content_hash;
    std::filesystem::path directory;
    std::vector<RunRecord> runs;
    std::vector<std::string> files;
    std::vector<std::string> failed_checks;

    bool all_ok() const;
};

/**
 * Executes every optimizer run, the optional ODE integration and the
 * optional consistency study, concurrently. Writes one table per run,
 * report.json and manifest.json into `out_dir`. A failing run is recorded
 * and does not stop its siblings.
 */
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Iterations to reach f - f* <= f_tol per optimizer run, in config order.
struct ComparisonRow {
    std::string label;
    std::int64_t iterations = 0;
    bool reached = false;
    double final_gap = kNaN;
};
std::vector<ComparisonRow> comparison_summary(const RunManifest& manifest,
                                              const ExperimentConfig& config);

std::string version();
std::filesystem::path config_dir();

}  // namespace agem::harness
