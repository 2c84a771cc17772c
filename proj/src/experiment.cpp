#include "bcih/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bcih/errors.hpp"

namespace bcih {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int condition_slot(Condition c) { return static_cast<int>(c); }

}  // namespace

const std::array<ConditionOrder, 6>& condition_orders() {
    using enum Condition;
    static const std::array<ConditionOrder, 6> orders{{{NO_A, BCI_A, ALL_A},
                                                       {BCI_A, ALL_A, NO_A},
                                                       {ALL_A, NO_A, BCI_A},
                                                       {NO_A, ALL_A, BCI_A},
                                                       {ALL_A, BCI_A, NO_A},
                                                       {BCI_A, NO_A, ALL_A}}};
    return orders;
}

ExperimentPlan make_plan(int n_operators, int trials_per_condition, std::uint64_t base_seed) {
    ExperimentPlan p;
    p.n_operators = n_operators;
    p.trials_per_condition = trials_per_condition;
    p.base_seed = base_seed;
    for (int i = 0; i < std::max(n_operators, 0); ++i) p.orders.push_back(condition_orders()[static_cast<std::size_t>(i) % 6]);
    p.validate();
    return p;
}

std::uint64_t ExperimentPlan::operator_seed(int op) const { return derive_seed(base_seed, 0x6f70, static_cast<std::uint64_t>(op)); }

std::uint64_t ExperimentPlan::trial_seed(int op, Condition c, int trial) const {
    return derive_seed(base_seed, static_cast<std::uint64_t>(op), static_cast<std::uint64_t>(condition_slot(c)) + 1,
                       static_cast<std::uint64_t>(trial) + 1);
}

void ExperimentPlan::validate() const {
    if (n_operators < 1) throw ConfigError("n_operators must be >= 1");
    if (trials_per_condition < 1) throw ConfigError("trials_per_condition must be >= 1");
    if (orders.size() != static_cast<std::size_t>(n_operators))
        throw ConfigError(fmt::format("plan has {} condition orders for {} operators", orders.size(), n_operators));
    for (const auto& o : orders) {
        std::set<Condition> s(o.begin(), o.end());
        if (s.size() != 3) throw ConfigError("each condition order must be a permutation of NO_A, BCI_A, ALL_A");
    }
    std::set<std::uint64_t> seeds;
    for (int op = 0; op < n_operators; ++op)
        for (Condition c : kAllConditions)
            for (int t = 0; t < trials_per_condition; ++t)
                if (!seeds.insert(trial_seed(op, c, t)).second) throw ConfigError("trial seeds collide");
}

void ExperimentConfig::validate() const {
    plan.validate();
    operator_config.validate();
    subject.validate();
    guide.validate();
    if (!(calibration_seconds > 0.0)) throw ConfigError("calibration_seconds must be positive");
    if (!(timeout > 0.0)) throw ConfigError("timeout must be positive");
}

json to_json(const ExperimentConfig& c) {
    json orders = json::array();
    for (const auto& o : c.plan.orders) orders.push_back({to_string(o[0]), to_string(o[1]), to_string(o[2])});
    return {{"n_operators", c.plan.n_operators},
            {"trials_per_condition", c.plan.trials_per_condition},
            {"base_seed", c.plan.base_seed},
            {"orders", orders},
            {"scene", to_json(c.scene)},
            {"scene_seed", c.scene_seed},
            {"operator", to_json(c.operator_config)},
            {"subject", to_json(c.subject)},
            {"guide", to_json(c.guide)},
            {"calibration",
             {{"covariance_shrinkage", c.calibration.covariance_shrinkage},
              {"csp_pairs", c.calibration.csp_pairs},
              {"n_selected", c.calibration.n_selected},
              {"lda_gamma", c.calibration.lda_gamma}}},
            {"calibration_seconds", c.calibration_seconds},
            {"timeout", c.timeout}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        const int n = j.value("n_operators", 8);
        const int t = j.value("trials_per_condition", 3);
        const auto seed = j.value("base_seed", std::uint64_t{1});
        c.plan = make_plan(n, t, seed);
        if (j.contains("orders")) {
            c.plan.orders.clear();
            for (const auto& o : j.at("orders")) {
                if (!o.is_array() || o.size() != 3) throw ConfigError("each order must list three conditions");
                c.plan.orders.push_back({condition_from_string(o[0].get<std::string>()),
                                         condition_from_string(o[1].get<std::string>()),
                                         condition_from_string(o[2].get<std::string>())});
            }
        }
        if (j.contains("scene")) c.scene = scene_spec_from_json(j.at("scene"));
        c.scene_seed = j.value("scene_seed", std::uint64_t{0});
        if (j.contains("operator")) c.operator_config = operator_config_from_json(j.at("operator"));
        if (j.contains("subject")) c.subject = synth_config_from_json(j.at("subject"));
        if (j.contains("guide")) c.guide = guide_law_from_json(j.at("guide"));
        if (j.contains("calibration")) {
            const auto& k = j.at("calibration");
            c.calibration.covariance_shrinkage = k.value("covariance_shrinkage", c.calibration.covariance_shrinkage);
            c.calibration.csp_pairs = k.value("csp_pairs", c.calibration.csp_pairs);
            c.calibration.n_selected = k.value("n_selected", c.calibration.n_selected);
            c.calibration.lda_gamma = k.value("lda_gamma", c.calibration.lda_gamma);
        }
        c.calibration_seconds = j.value("calibration_seconds", c.calibration_seconds);
        c.timeout = j.value("timeout", c.timeout);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    } catch (const InputError& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

OperatorProfile operator_profile(const ExperimentConfig& config, int op) {
    OperatorProfile p;
    p.index = op;
    const std::uint64_t s = config.plan.operator_seed(op);
    p.operator_config = config.operator_config;
    p.operator_config.seed = derive_seed(s, config.operator_config.seed, 1);
    p.subject = config.subject;
    p.subject.seed = derive_seed(s, config.subject.seed, 2);
    return p;
}

CalibrationStreams record_calibration(EegSynth& synth, const OperatorConfig& config, double seconds_per_class) {
    const double dt = LoopRates::kDt;
    CalibrationStreams out;
    for (auto kind : {CalibrationTask::Rectangle, CalibrationTask::Spiral}) {
        const auto trace = scripted_calibration_run(kind, seconds_per_class, config, dt);
        auto& blocks = kind == CalibrationTask::Rectangle ? out.low : out.high;
        const auto ticks = static_cast<std::int64_t>(trace.workload.size());
        for (std::int64_t j = 0; (j + 1) * LoopRates::kTicksPerBlock <= ticks; ++j) {
            const double w = trace.workload[static_cast<std::size_t>((j + 1) * LoopRates::kTicksPerBlock - 1)];
            blocks.push_back(synth.step(std::clamp(w, 0.0, 1.0), LoopRates::eeg_block_size(j)));
        }
    }
    return out;
}

CalibrationResult calibrate_subject(const SynthConfig& subject, const OperatorConfig& config, double seconds_per_class,
                                    const CalibrationOptions& options) {
    EegSynth synth(subject);
    const auto streams = record_calibration(synth, config, seconds_per_class);
    return calibrate_pipeline(streams.low, streams.high, options);
}

double held_out_accuracy(const PipelineModel& model, std::span<const EegBlock> low, std::span<const EegBlock> high) {
    std::size_t correct = 0, total = 0;
    for (const auto& l : stream_classify(model, low)) correct += l.label == -1, ++total;
    for (const auto& l : stream_classify(model, high)) correct += l.label == 1, ++total;
    if (total == 0) throw InputError("held_out_accuracy: streams too short for a single window");
    return static_cast<double>(correct) / static_cast<double>(total);
}

TrialMetrics trial_metrics(const TrialRecord& record, const Scene& scene, int op, int trial) {
    TrialMetrics m;
    m.op = op;
    m.condition = record.condition;
    m.trial = trial;
    m.seed = record.seed;
    m.collisions = record.collisions.size();
    m.duration = record.duration;
    m.completed = record.outcome == Outcome::Completed;
    auto fraction = [&](PartFilter part) {
        try {
            return activation_fraction(record, scene, part);
        } catch (const InputError&) {
            return kNaN;
        }
    };
    m.activation = fraction(PartFilter::Whole);
    m.activation_part1 = fraction(PartFilter::Part1);
    m.activation_part2 = fraction(PartFilter::Part2);
    m.mean_index = mean_index(record, scene, PartFilter::Whole);
    m.mean_index_part1 = mean_index(record, scene, PartFilter::Part1);
    m.mean_index_part2 = mean_index(record, scene, PartFilter::Part2);
    double w = 0.0;
    for (const auto& s : record.samples) w += s.workload;
    m.mean_workload = record.samples.empty() ? kNaN : w / static_cast<double>(record.samples.size());
    return m;
}

Aggregate aggregate(std::span<const double> values) {
    Aggregate a;
    double sum = 0.0;
    for (double v : values)
        if (!std::isnan(v)) sum += v, ++a.n;
    if (a.n == 0) return {kNaN, kNaN, 0};
    a.mean = sum / static_cast<double>(a.n);
    if (a.n > 1) {
        double ss = 0.0;
        for (double v : values)
            if (!std::isnan(v)) ss += (v - a.mean) * (v - a.mean);
        a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
    }
    return a;
}

std::vector<double> MetricsTable::column(Condition c, double TrialMetrics::*field) const {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.condition == c) out.push_back(r.*field);
    return out;
}

Aggregate MetricsTable::summary(Condition c, double TrialMetrics::*field) const { return aggregate(column(c, field)); }

Aggregate MetricsTable::collision_summary(Condition c) const {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.condition == c) v.push_back(static_cast<double>(r.collisions));
    return aggregate(v);
}

namespace {

Eigen::MatrixXd paired_by(const std::vector<TrialMetrics>& rows, const std::function<double(const TrialMetrics&)>& get,
                          bool per_subject) {
    // Key (operator, trial) or (operator) -> per-condition sums and counts.
    std::map<std::pair<int, int>, std::array<std::pair<double, int>, 3>> cells;
    for (const auto& r : rows) {
        auto& cell = cells[{r.op, per_subject ? 0 : r.trial}][static_cast<std::size_t>(condition_slot(r.condition))];
        cell.first += get(r);
        cell.second += 1;
    }
    std::vector<std::array<double, 3>> complete;
    for (const auto& [key, cell] : cells) {
        if (std::any_of(cell.begin(), cell.end(), [](const auto& c) { return c.second == 0; })) continue;
        complete.push_back({cell[0].first / cell[0].second, cell[1].first / cell[1].second, cell[2].first / cell[2].second});
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(complete.size()), 3);
    for (std::size_t i = 0; i < complete.size(); ++i)
        for (int j = 0; j < 3; ++j) m(static_cast<Eigen::Index>(i), j) = complete[i][static_cast<std::size_t>(j)];
    return m;
}

}  // namespace

Eigen::MatrixXd MetricsTable::paired(double TrialMetrics::*field, bool per_subject) const {
    return paired_by(rows, [field](const TrialMetrics& r) { return r.*field; }, per_subject);
}

Eigen::MatrixXd MetricsTable::paired_collisions(bool per_subject) const {
    return paired_by(rows, [](const TrialMetrics& r) { return static_cast<double>(r.collisions); }, per_subject);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    ExperimentResult res;
    res.config = config;
    res.scene = std::make_shared<const Scene>(build_scene(config.scene, config.scene_seed));
    const auto& plan = config.plan;
    for (int op = 0; op < plan.n_operators; ++op) {
        const auto profile = operator_profile(config, op);
        std::shared_ptr<const PipelineModel> model;
        try {
            auto cal = calibrate_subject(profile.subject, profile.operator_config, config.calibration_seconds,
                                         config.calibration);
            res.calibration.push_back(cal.diagnostics);
            model = std::make_shared<const PipelineModel>(std::move(cal.model));
        } catch (const CalibrationError& e) {
            res.calibration.emplace_back();
            res.failures.push_back(fmt::format("operator {}: {}", op, e.what()));
        }
        res.models.push_back(model);
        if (!model) continue;

        int position = 0;
        for (Condition c : plan.orders[static_cast<std::size_t>(op)]) {
            for (int t = 0; t < plan.trials_per_condition; ++t) {
                TrialSetup setup;
                setup.scene = res.scene;
                setup.model = model;
                setup.condition = c;
                setup.operator_config = profile.operator_config;
                setup.subject = profile.subject;
                setup.guide = config.guide;
                setup.seed = plan.trial_seed(op, c, t);
                setup.timeout = config.timeout;
                TrialRun run{op, t, position++, run_trial(setup)};
                res.table.rows.push_back(trial_metrics(run.record, *res.scene, op, t));
                if (progress) progress(run);
                res.runs.push_back(std::move(run));
            }
        }
    }
    return res;
}

ExperimentStats compute_stats(const MetricsTable& table) {
    ExperimentStats s;
    auto guarded_friedman = [](const Eigen::MatrixXd& m, const char* name) {
        try {
            return friedman_test(m);
        } catch (const std::exception& e) {
            StatResult r;
            r.test = std::string("friedman (") + name + " unavailable: " + e.what() + ")";
            r.p_value = 1.0;
            return r;
        }
    };
    s.friedman_collisions_trials = guarded_friedman(table.paired_collisions(false), "trials");
    s.friedman_collisions_subjects = guarded_friedman(table.paired_collisions(true), "subjects");
    s.friedman_index_trials = guarded_friedman(table.paired(&TrialMetrics::mean_index, false), "index");

    const Eigen::MatrixXd m = table.paired_collisions(false);
    const std::pair<Condition, Condition> pairs[] = {{Condition::NO_A, Condition::BCI_A},
                                                     {Condition::NO_A, Condition::ALL_A},
                                                     {Condition::BCI_A, Condition::ALL_A}};
    for (const auto& [a, b] : pairs) {
        const std::string name = fmt::format("{} vs {}", to_string(a), to_string(b));
        std::vector<double> va, vb;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            va.push_back(m(i, condition_slot(a)));
            vb.push_back(m(i, condition_slot(b)));
        }
        StatResult r;
        try {
            r = wilcoxon_signed_rank(va, vb);
        } catch (const std::exception& e) {
            r.test = std::string("wilcoxon (unavailable: ") + e.what() + ")";
            r.p_value = 1.0;
        }
        s.wilcoxon_collisions.emplace_back(name, r);
    }
    return s;
}

json to_json(const ExperimentStats& s) {
    json w = json::object();
    for (const auto& [name, r] : s.wilcoxon_collisions) w[name] = to_json(r);
    return {{"friedman_collisions_trials", to_json(s.friedman_collisions_trials)},
            {"friedman_collisions_subjects", to_json(s.friedman_collisions_subjects)},
            {"friedman_index_trials", to_json(s.friedman_index_trials)},
            {"wilcoxon_collisions", w}};
}

HeatmapGrid::HeatmapGrid(double width, double height)
    : cols(static_cast<int>(std::ceil(width / kCell))), rows(static_cast<int>(std::ceil(height / kCell))) {
    if (cols < 1 || rows < 1) throw InputError("heatmap canvas must be non-empty");
    sum.assign(static_cast<std::size_t>(cols * rows), 0.0);
    count.assign(static_cast<std::size_t>(cols * rows), 0);
}

void HeatmapGrid::add(Vec2 p, double value) {
    const int c = std::clamp(static_cast<int>(std::floor(p.x / kCell)), 0, cols - 1);
    const int r = std::clamp(static_cast<int>(std::floor(p.y / kCell)), 0, rows - 1);
    const auto i = static_cast<std::size_t>(r * cols + c);
    sum[i] += value;
    count[i] += 1;
}

std::optional<double> HeatmapGrid::mean(int row, int col) const {
    const auto i = static_cast<std::size_t>(row * cols + col);
    if (count[i] == 0) return std::nullopt;
    return sum[i] / static_cast<double>(count[i]);
}

std::size_t HeatmapGrid::total_count() const {
    std::size_t n = 0;
    for (auto c : count) n += c;
    return n;
}

double HeatmapGrid::mean_over(const std::function<bool(int, int)>& keep) const {
    double s = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (auto m = mean(r, c); m && keep(r, c)) s += *m, ++n;
    return n == 0 ? kNaN : s / static_cast<double>(n);
}

HeatmapGrid build_heatmap(std::span<const TrialRecord* const> records, const Scene& scene,
                          std::optional<Condition> condition) {
    if (records.empty()) throw InputError("build_heatmap needs at least one record");
    HeatmapGrid g(scene.width, scene.height);
    for (const auto* r : records) {
        if (condition && r->condition != *condition) continue;
        for (const auto& s : r->samples) g.add(s.cursor, s.index);
    }
    return g;
}

std::string heatmap_csv(const HeatmapGrid& grid) {
    std::string out;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (c) out += ',';
            if (auto m = grid.mean(r, c)) out += fmt::format("{:.4f}", *m);
            else out += "NA";
        }
        out += '\n';
    }
    return out;
}

namespace {

std::string num(double v, int digits = 4) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.{}f}", v, digits); }

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << text;
    if (!f) throw IoError("write failed: " + p.string());
}

}  // namespace

std::string metrics_csv(const MetricsTable& table) {
    std::string out =
        "operator,condition,trial,seed,collisions,duration,completed,activation,activation_part1,activation_part2,"
        "mean_index,mean_index_part1,mean_index_part2,mean_workload\n";
    for (const auto& r : table.rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.op, to_string(r.condition), r.trial, r.seed,
                           r.collisions, num(r.duration, 2), r.completed ? 1 : 0, num(r.activation),
                           num(r.activation_part1), num(r.activation_part2), num(r.mean_index), num(r.mean_index_part1),
                           num(r.mean_index_part2), num(r.mean_workload));
    }
    return out;
}

std::string summary_markdown(const ExperimentResult& result, const ExperimentStats& stats) {
    const auto& t = result.table;
    const Aggregate col[3] = {t.collision_summary(Condition::NO_A), t.collision_summary(Condition::BCI_A),
                              t.collision_summary(Condition::ALL_A)};
    const double red_bci = 1.0 - col[1].mean / col[0].mean;
    const double red_all = 1.0 - col[2].mean / col[0].mean;
    const auto act = t.summary(Condition::BCI_A, &TrialMetrics::activation);
    const auto act1 = t.summary(Condition::BCI_A, &TrialMetrics::activation_part1);
    const auto act2 = t.summary(Condition::BCI_A, &TrialMetrics::activation_part2);
    const auto idx1 = t.summary(Condition::NO_A, &TrialMetrics::mean_index_part1);
    const auto idx2 = t.summary(Condition::NO_A, &TrialMetrics::mean_index_part2);
    const auto idx_no = t.summary(Condition::NO_A, &TrialMetrics::mean_index);
    const auto idx_all = t.summary(Condition::ALL_A, &TrialMetrics::mean_index);
    auto tag = [](bool ok) { return ok ? "PASS" : "INFO"; };
    auto pct = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.1f}%", 100.0 * v); };

    std::string out = "# Experiment summary\n\n";
    out += fmt::format("Operators: {} ({} calibrated), trials per condition: {}, records: {}\n\n",
                       result.config.plan.n_operators,
                       std::count_if(result.models.begin(), result.models.end(), [](const auto& m) { return !!m; }),
                       result.config.plan.trials_per_condition, result.runs.size());
    for (const auto& f : result.failures) out += "- calibration failure: " + f + "\n";
    out += "## Collisions per trial\n\n| condition | M | SD | n |\n|---|---|---|---|\n";
    for (Condition c : kAllConditions) {
        const auto& a = col[condition_slot(c)];
        out += fmt::format("| {} | {} | {} | {} |\n", to_string(c), num(a.mean, 2), num(a.sd, 2), a.n);
    }
    out += "\n## Comparison with the reference human study\n\n| quantity | simulated | reference | check |\n|---|---|---|---|\n";
    out += fmt::format("| collision ordering NO_A > BCI_A > ALL_A | {} | holds | {} |\n",
                       (col[0].mean > col[1].mean && col[1].mean > col[2].mean) ? "holds" : "violated",
                       tag(col[0].mean > col[1].mean && col[1].mean > col[2].mean));
    out += fmt::format("| BCI_A collision reduction | {} | 53% | {} |\n", pct(red_bci), tag(red_bci >= 0.30));
    out += fmt::format("| ALL_A collision reduction | {} | 88% | {} |\n", pct(red_all), tag(red_all >= 0.60));
    out += fmt::format("| BCI_A activation, whole | {} | 59% | {} |\n", pct(act.mean),
                       tag(act.mean >= 0.30 && act.mean <= 0.85));
    out += fmt::format("| BCI_A activation, part 1 / part 2 | {} / {} | 64% / 46% | {} |\n", pct(act1.mean),
                       pct(act2.mean), tag(act1.mean > act2.mean));
    out += fmt::format("| NO_A index, part 1 / part 2 | {} / {} | 0.27 / -0.14 | {} |\n", num(idx1.mean, 2),
                       num(idx2.mean, 2), tag(idx1.mean > idx2.mean));
    out += fmt::format("| index ALL_A vs NO_A | {} vs {} | lower with assistance | {} |\n", num(idx_all.mean, 2),
                       num(idx_no.mean, 2), tag(idx_all.mean < idx_no.mean));
    const auto& fr = stats.friedman_collisions_trials;
    out += fmt::format("| Friedman on collisions (per trial) | chi2={:.1f}, p={:.2g} | chi2=38.7, p<0.001 | {} |\n",
                       fr.statistic, fr.p_value, tag(fr.significant()));
    out += "\n## Statistics\n\n| test | statistic | p | n |\n|---|---|---|---|\n";
    auto row = [&](const std::string& name, const StatResult& r) {
        out += fmt::format("| {} | {:.3f} | {:.4g} | {} |\n", name, r.statistic, r.p_value, r.n);
    };
    row("Friedman collisions (trials)", stats.friedman_collisions_trials);
    row("Friedman collisions (subject means)", stats.friedman_collisions_subjects);
    row("Friedman mean index (trials)", stats.friedman_index_trials);
    for (const auto& [name, r] : stats.wilcoxon_collisions) row("Wilcoxon collisions " + name, r);
    return out;
}

std::string record_file_name(int op, Condition c, int trial) {
    return fmt::format("op{:02d}_{}_t{}.ndjson", op, to_string(c), trial);
}

void export_reports(const ExperimentResult& result, const ExperimentStats& stats, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "records", ec);
    if (ec) throw IoError("cannot create " + (dir / "records").string() + ": " + ec.message());
    fs::create_directories(dir / "models", ec);
    if (ec) throw IoError("cannot create " + (dir / "models").string() + ": " + ec.message());

    write_file(dir / "config.json", to_json(result.config).dump(2) + "\n");
    write_file(dir / "metrics.csv", metrics_csv(result.table));
    write_file(dir / "stats.json", to_json(stats).dump(2) + "\n");
    write_file(dir / "summary.md", summary_markdown(result, stats));
    for (std::size_t op = 0; op < result.models.size(); ++op)
        if (result.models[op])
            write_file(dir / "models" / fmt::format("op{:02d}.json", op), to_json(*result.models[op]).dump() + "\n");
    std::vector<const TrialRecord*> records;
    for (const auto& run : result.runs) {
        write_file(dir / "records" / record_file_name(run.op, run.record.condition, run.trial), to_ndjson(run.record));
        records.push_back(&run.record);
    }
    if (!records.empty())
        for (Condition c : kAllConditions)
            write_file(dir / fmt::format("heatmap_{}.csv", to_string(c)),
                       heatmap_csv(build_heatmap(records, *result.scene, c)));
}

std::vector<TrialRecord> load_archive(const fs::path& dir) {
    const fs::path rec = fs::is_directory(dir / "records") ? dir / "records" : dir;
    if (!fs::is_directory(rec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(rec))
        if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<TrialRecord> out;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw IoError("cannot read " + f.string());
        std::stringstream ss;
        ss << in.rdbuf();
        out.push_back(trial_from_ndjson(ss.str()));
    }
    return out;
}

}  // namespace bcih
