#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bcih/closed_loop.hpp"
#include "bcih/stats.hpp"

namespace bcih {

using ConditionOrder = std::array<Condition, 3>;

/// The six orderings of the three conditions, arranged so that each block
/// of three is a Latin square and neighbours never repeat.
const std::array<ConditionOrder, 6>& condition_orders();

struct ExperimentPlan {
    int n_operators = 8;
    int trials_per_condition = 3;
    std::uint64_t base_seed = 1;
    std::vector<ConditionOrder> orders;  // one per operator

    /// Throws ConfigError on bad counts, missing orders or colliding seeds.
    void validate() const;
    std::uint64_t operator_seed(int op) const;
    std::uint64_t trial_seed(int op, Condition c, int trial) const;
};

ExperimentPlan make_plan(int n_operators = 8, int trials_per_condition = 3, std::uint64_t base_seed = 1);

struct ExperimentConfig {
    ExperimentPlan plan = make_plan();
    SceneSpec scene;
    std::uint64_t scene_seed = 0;
    OperatorConfig operator_config;
    SynthConfig subject;
    GuideLaw guide;
    CalibrationOptions calibration;
    double calibration_seconds = 60.0;  // per class
    double timeout = 120.0;

    void validate() const;
};

json to_json(const ExperimentConfig& c);
/// Missing fields keep their defaults; `n_operators`, `trials_per_condition`
/// and `base_seed` may be given at the top level.
ExperimentConfig experiment_config_from_json(const json& j);

/// Per-operator motor and EEG parameters derived from the plan.
struct OperatorProfile {
    int index = 0;
    OperatorConfig operator_config;
    SynthConfig subject;
};

OperatorProfile operator_profile(const ExperimentConfig& config, int op);

/// EEG of the two scripted calibration tasks, 0.1 s blocks (51/52 samples),
/// generated back to back by one synthesizer. The latent level of each block
/// is the trace's level at the block end.
struct CalibrationStreams {
    std::vector<EegBlock> low;   // rectangle
    std::vector<EegBlock> high;  // spiral
};

CalibrationStreams record_calibration(EegSynth& synth, const OperatorConfig& config, double seconds_per_class);

/// Records both tasks and trains the pipeline. Throws CalibrationError.
CalibrationResult calibrate_subject(const SynthConfig& subject, const OperatorConfig& config,
                                    double seconds_per_class = 60.0, const CalibrationOptions& options = {});

/// Fraction of windows in fresh low/high streams whose raw label matches
/// the class (low -> -1, high -> +1).
double held_out_accuracy(const PipelineModel& model, std::span<const EegBlock> low, std::span<const EegBlock> high);

struct TrialMetrics {
    int op = 0;
    Condition condition = Condition::NO_A;
    int trial = 0;
    std::uint64_t seed = 0;
    std::size_t collisions = 0;
    double duration = 0.0;
    bool completed = false;
    double activation = 0.0;
    double activation_part1 = 0.0;  // NaN when the part holds no samples
    double activation_part2 = 0.0;
    double mean_index = 0.0;
    double mean_index_part1 = 0.0;
    double mean_index_part2 = 0.0;
    double mean_workload = 0.0;
};

TrialMetrics trial_metrics(const TrialRecord& record, const Scene& scene, int op, int trial);

struct Aggregate {
    double mean = 0.0;  // M
    double sd = 0.0;    // SD (n - 1 denominator; 0 for a single value)
    std::size_t n = 0;
};

/// Mean and SD ignoring NaNs.
Aggregate aggregate(std::span<const double> values);

struct MetricsTable {
    std::vector<TrialMetrics> rows;

    std::vector<double> column(Condition c, double TrialMetrics::*field) const;
    Aggregate summary(Condition c, double TrialMetrics::*field) const;
    Aggregate collision_summary(Condition c) const;
    /// Rows of (operator, trial) x condition for a paired analysis; with
    /// `per_subject` each operator's trials are averaged into one row.
    Eigen::MatrixXd paired(double TrialMetrics::*field, bool per_subject) const;
    Eigen::MatrixXd paired_collisions(bool per_subject) const;
};

struct TrialRun {
    int op = 0;
    int trial = 0;
    int position = 0;  // 0-based index of the trial in the operator's session
    TrialRecord record;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::shared_ptr<const Scene> scene;
    std::vector<std::shared_ptr<const PipelineModel>> models;  // null when calibration failed
    std::vector<CalibrationDiagnostics> calibration;
    std::vector<std::string> failures;                       // per-operator diagnostics
    std::vector<TrialRun> runs;
    MetricsTable table;
};

using ProgressFn = std::function<void(const TrialRun&)>;

/// Runs every operator's calibration and trials in the planned order. A
/// calibration failure skips that operator and is logged in `failures`.
ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

struct ExperimentStats {
    StatResult friedman_collisions_trials;    // (operator, trial) rows
    StatResult friedman_collisions_subjects;  // per-operator means
    StatResult friedman_index_trials;
    std::vector<std::pair<std::string, StatResult>> wilcoxon_collisions;  // two-sided post-hocs
};

ExperimentStats compute_stats(const MetricsTable& table);
json to_json(const ExperimentStats& s);

/// 9x9 px bins over the scene canvas; the last row/column may be partial.
struct HeatmapGrid {
    static constexpr int kCell = 9;
    int cols = 0;
    int rows = 0;
    std::vector<double> sum;
    std::vector<std::size_t> count;

    HeatmapGrid(double width = 1024.0, double height = 768.0);
    void add(Vec2 p, double value);
    std::optional<double> mean(int row, int col) const;
    std::size_t total_count() const;
    /// Mean over non-empty cells selected by `keep(row, col)`.
    double mean_over(const std::function<bool(int, int)>& keep) const;
};

HeatmapGrid build_heatmap(std::span<const TrialRecord* const> records, const Scene& scene,
                          std::optional<Condition> condition = std::nullopt);

/// Rows of comma-separated cell means, "NA" for empty cells.
std::string heatmap_csv(const HeatmapGrid& grid);
std::string metrics_csv(const MetricsTable& table);
std::string summary_markdown(const ExperimentResult& result, const ExperimentStats& stats);

/// Writes metrics.csv, stats.json, heatmap_<COND>.csv, summary.md, the
/// records/ archive and models/. Throws IoError.
void export_reports(const ExperimentResult& result, const ExperimentStats& stats, const std::filesystem::path& dir);

/// File name of one archived record.
std::string record_file_name(int op, Condition c, int trial);

/// Loads every records/*.ndjson under `dir` (sorted by name).
std::vector<TrialRecord> load_archive(const std::filesystem::path& dir);

}  // namespace bcih
