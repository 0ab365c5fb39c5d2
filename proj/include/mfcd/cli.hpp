#pragma once

// Config-driven experiment runner behind the `mfcd` executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfcd/model.hpp"
#include "mfcd/quantum.hpp"

namespace mfcd::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kInvariantFailure = 2,
    kPartialBatchFailure = 3,
};

struct InstanceConfig {
    std::string source = "generator";   // generator | inline | file
    std::string generator = "staggered"; // gaussian | staggered
    int n_sites = 8;
    double sigma = 1.0;
    Topology topology = Topology::FullyConnected;
    double gamma = 0.0;
    double gamma_d = 1.0;
    double h = 1.1;  // staggered field magnitude
    std::uint64_t coupling_seed = 1;
    std::uint64_t field_seed = 1;
    std::string path;                   // source == file
    nlohmann::json inline_instance;     // source == inline
};

struct ScheduleConfig {
    ScheduleFamily family = ScheduleFamily::Trig;
    double total_time = 1.0;  // ns
    double delta = 1e-3;
};

struct SweepConfig {
    std::vector<std::uint64_t> j_seeds{1};
    std::vector<std::uint64_t> h_seeds;  // defaults to 1..100
    std::vector<double> total_times{0.5, 1.0, 2.0, 5.0};
};

struct ExportConfig {
    int n_breakpoints = 100;
    double ramp_end = 0.05;
};

struct VerifyConfig {
    double norm_tolerance = 1e-8;
    double boundary_tolerance = 1e-9;
    double fd_tolerance = 1e-4;
    double fd_min_ratio = 3.5;
    double frame_tolerance = 1e-6;
    double oracle_tolerance = 1e-10;
    bool corrupt_feedback_sign = false;
};

struct RunConfig {
    InstanceConfig instance;
    ScheduleConfig schedule;
    Drive drive = Drive::Mfcd;
    int steps = 2000;         // quantum RK4 steps; Bloch runs use twice as many
    int output_grid = 101;    // rows per site in trajectory CSVs
    int snapshots = 11;       // fixed-point comparison times
    SweepConfig sweep;
    int shots = 1000;
    std::uint64_t shot_seed = 7;
    ExportConfig export_options;
    VerifyConfig verify;
    int workers = 1;
    std::string output_dir = "out";
};

/// Parses and validates a config; missing keys take defaults. Errors are
/// ConfigError with the offending path, e.g. "config.schedule.total_time: ...".
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved config, every default included.
nlohmann::json to_json(const RunConfig& config);

/// Replaces the coupling seed and the J-seed sweep with `seed`.
void apply_seed_override(RunConfig& config, std::uint64_t seed);

/// Builds the configured instance (J and h seeds from the instance section).
ProblemInstance build_instance(const RunConfig& config);
ProblemInstance build_instance(const RunConfig& config, std::uint64_t coupling_seed, std::uint64_t field_seed);

Schedule build_schedule(const ScheduleConfig& config);
Schedule build_schedule(const ScheduleConfig& config, double total_time);

// Subcommands. Each writes into config.output_dir and returns an ExitCode;
// `log` receives a short human-readable report.
int cmd_bloch(const RunConfig& config, std::ostream& log);
int cmd_fidelity_batch(const RunConfig& config, std::ostream& log);
int cmd_success_curve(const RunConfig& config, std::ostream& log);
int cmd_export_schedule(const RunConfig& config, std::ostream& log);
int cmd_verify(const RunConfig& config, std::ostream& log);

struct BatchSample {
    std::uint64_t j_seed = 0;
    std::uint64_t h_seed = 0;
    bool ok = false;
    std::string error;
    double fidelity_cd = 0.0;
    double fidelity_plain = 0.0;
    double max_norm_drift = 0.0;
};

struct BatchGroupSummary {
    std::uint64_t j_seed = 0;
    int samples = 0;
    int failures = 0;
    int improved = 0;
    double fraction_improved = 0.0;  // improved / samples; failures count as not improved
    double median_cd = 0.0;
    double median_plain = 0.0;
};

/// Runs every (J seed, h seed) pair on `workers` threads. Results are in
/// sweep order regardless of scheduling; failures are recorded, not thrown.
std::vector<BatchSample> run_fidelity_batch(const RunConfig& config);
std::vector<BatchGroupSummary> summarize_batch(const RunConfig& config, const std::vector<BatchSample>& samples);

struct SuccessPoint {
    double total_time = 0.0;
    std::string schedule;  // mfcd | linear
    std::string target;
    int successes = 0;
    int shots = 0;
    double probability = 0.0;
    Interval wilson;
    double ground_population = 0.0;
    double max_norm_drift = 0.0;
};

std::vector<SuccessPoint> run_success_curve(const RunConfig& config);

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

std::vector<CheckResult> run_verify(const RunConfig& config);

}  // namespace mfcd::cli
