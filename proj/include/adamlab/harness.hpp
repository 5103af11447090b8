#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adamlab/optimizers.hpp"
#include "adamlab/problems.hpp"
#include "adamlab/schedules.hpp"
#include "adamlab/stability.hpp"
#include "adamlab/vec.hpp"

namespace adamlab {

using json = nlohmann::json;

// Raised on malformed configs; message names the offending field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OptimizerSetup {
    bool is_kadam = true;
    KAdamConfig kadam;
    LegacyVariant legacy = LegacyVariant::Sgd;
    AdaptiveHyper legacy_hyper;
    double eta = 1e-3;
    double lambda = 0.0;

    // Stage-1 pair (or the legacy pair); drives bound columns and region labels.
    AdaptiveHyper primary_hyper() const {
        return is_kadam ? kadam.stages.front() : legacy_hyper;
    }
};

struct ExperimentConfig {
    json raw; // full config as parsed, for the manifest and hashing

    json problem_spec;
    json optimizer_spec;
    json schedule_spec; // may be empty -> constant at optimizer eta

    long steps = 1000;
    std::uint64_t seed = 0;
    long log_every = 1;
    std::string output_dir; // empty = no files written
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config_file(const std::string& path);

Problem build_problem(const json& spec);
OptimizerSetup build_optimizer(const json& spec);
Schedule build_schedule(const json& spec, const OptimizerSetup& opt);

struct TrajectoryRecord {
    long step = 0;
    double loss = 0.0;
    double max_update = 0.0; // ||u_n||_inf of the adaptive output (pre-eta, no decoupled decay)
    double bound = 0.0;      // max-update bound at n for the final stage (NaN when inapplicable)
    double eta_n = 0.0;
    std::vector<double> stage_max_updates; // per stage, k entries
    std::vector<double> stage_bounds;
    std::vector<double> param_norm_sq;     // per tracked block
    bool diverged = false;
};

struct RunOptions {
    bool keep_theta_history = false;  // theta after every step (plus theta0)
    bool keep_update_history = false; // adaptive update u_n per step
    std::vector<long> heldout_checkpoints;
};

struct RunResult {
    std::vector<TrajectoryRecord> records;
    long diverged_step = -1; // -1 = completed
    Vec theta0;
    Vec final_theta;
    std::vector<Vec> theta_history;
    std::vector<Vec> update_history;
    std::map<long, double> heldout_at;
};

// Runs the configured optimizer on the configured problem, logging a record
// every log_every steps (the divergence marker is always logged). Writes
// trajectory.csv and manifest.json under output_dir when set.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Anything past this magnitude counts as divergence (the expected endpoint
// of BMinus runs).
inline constexpr double kDivergenceCutoff = 1e30;

// Two-point slope of log(max_update) at at_step over a +-half_window window.
// Throws std::runtime_error when the window is missing or not positive/finite.
double fit_log_slope(const std::vector<TrajectoryRecord>& records, long at_step,
                     long half_window = 5);

struct BoundReport {
    long checked = 0;
    long violations = 0;
    double worst_ratio = 0.0; // max over steps of max_update / bound
};

// Counts steps with max_update > slack * bound, recomputing the bound from
// hyper. Divergence markers are excluded.
BoundReport verify_bound(const std::vector<TrajectoryRecord>& records,
                         const AdaptiveHyper& hyper, double slack = 1.05);

struct SweepRow {
    AdaptiveHyper hyper;
    double c_value = 0.0;
    long steps_run = 0;
    double final_loss = 0.0;
    double best_loss = 0.0;
    double checkpoint_loss = 0.0; // held-out loss at checkpoint_step
    double fitted_slope = 0.0;    // NaN when no fit possible
    double predicted_slope = 0.0; // |C|/2 in BMinus, 0 otherwise
    long bound_violations = 0;
    double worst_bound_ratio = 0.0;
    long diverged_step = -1;
    std::string error; // nonempty when the point failed
};

struct SweepOptions {
    int points = 16;          // subsampled uniformly from the curve
    long checkpoint_step = 0; // 0 = steps/2
    long slope_step = 0;      // 0 = skip slope fitting
    long slope_half_window = 5;
    double slack = 1.05;
    int workers = 0;          // 0 = hardware concurrency
};

// Runs the base config once per curve point, overriding the stage-1 pair.
// Rows are sorted by c_value descending. Per-point failures land in the
// row's error field and do not abort the sweep.
std::vector<SweepRow> sweep_along_curve(const CurveSample& curve,
                                        const ExperimentConfig& base,
                                        const SweepOptions& options);

// CSV / manifest helpers (schemas are recorded in the manifest).
std::string trajectory_csv(const std::vector<TrajectoryRecord>& records,
                           const std::vector<std::string>& block_names, int k);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::uint64_t config_hash(const json& j);
void write_manifest(const std::string& output_dir, const json& config,
                    const std::vector<std::pair<std::string, std::string>>& files);

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

} // namespace adamlab
