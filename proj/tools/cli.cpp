#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "bcih/errors.hpp"
#include "bcih/experiment.hpp"
#include "bcih/server.hpp"

namespace bcih {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << text;
    if (!f) throw IoError("write failed: " + p.string());
}

json parse_json(const std::string& text, const fs::path& p) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(fmt::format("{}: {}", p.string(), e.what()));
    }
}

const std::vector<std::string> kConditionNames{"NO_A", "BCI_A", "ALL_A"};

// The calibration bundle carries the subject and operator alongside the
// model, since the trial's EEG must come from the calibrated subject.
struct Bundle {
    PipelineModel model;
    SynthConfig subject;
    OperatorConfig operator_config;
};

json calibration_bundle(const Bundle& b, std::uint64_t seed, const CalibrationDiagnostics& d) {
    return {{"format", "bcih-calibration"}, {"version", 1},  {"seed", seed},
            {"subject", to_json(b.subject)},  {"operator", to_json(b.operator_config)},
            {"diagnostics", to_json(d)},      {"model", to_json(b.model)}};
}

Bundle load_bundle(const fs::path& p, std::uint64_t seed) {
    const json j = parse_json(read_file(p), p);
    if (j.value("format", "") == "bcih-calibration")
        return {pipeline_model_from_json(j.at("model")), synth_config_from_json(j.at("subject")),
                operator_config_from_json(j.at("operator"))};
    // Bare pipeline model: pair it with the profile the seed would calibrate.
    ExperimentConfig cfg;
    cfg.plan = make_plan(1, 1, seed);
    const auto prof = operator_profile(cfg, 0);
    return {pipeline_model_from_json(j), prof.subject, prof.operator_config};
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Workload-adaptive haptic guidance simulator", "bcih"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::uint64_t cal_seed = 1;
    std::string cal_out;
    double cal_seconds = 60.0;
    auto* cal = app.add_subcommand("calibrate", "Record the two calibration tasks and train a pipeline model");
    cal->add_option("--seed", cal_seed, "Subject seed")->required();
    cal->add_option("--out", cal_out, "Output model JSON")->required();
    cal->add_option("--seconds", cal_seconds, "Seconds per calibration task")->check(CLI::PositiveNumber);

    std::string rt_model, rt_condition, rt_out;
    std::uint64_t rt_seed = 1;
    double rt_timeout = 120.0;
    auto* rt = app.add_subcommand("run-trial", "Simulate one trial and write its NDJSON record");
    rt->add_option("--model", rt_model, "Calibration bundle or pipeline model JSON")->required()->check(CLI::ExistingFile);
    rt->add_option("--condition", rt_condition, "NO_A, BCI_A or ALL_A")->required()->check(CLI::IsMember(kConditionNames));
    rt->add_option("--seed", rt_seed, "Trial seed")->required();
    rt->add_option("--out", rt_out, "Output NDJSON (stdout when omitted)");
    rt->add_option("--timeout", rt_timeout, "Trial timeout in seconds")->check(CLI::PositiveNumber);

    std::string ex_config, ex_out;
    int ex_ops = 0, ex_trials = 0;
    auto* ex = app.add_subcommand("run-experiment", "Run the full protocol and export reports");
    ex->add_option("--config", ex_config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "Output directory")->required();
    ex->add_option("--operators", ex_ops, "Override n_operators")->check(CLI::PositiveNumber);
    ex->add_option("--trials", ex_trials, "Override trials_per_condition")->check(CLI::PositiveNumber);

    std::string hm_in, hm_condition, hm_out;
    auto* hm = app.add_subcommand("export-heatmap", "Average the index over 9x9 px cells of an archive");
    hm->add_option("--in", hm_in, "Experiment output directory or records directory")->required()->check(CLI::ExistingDirectory);
    hm->add_option("--condition", hm_condition, "NO_A, BCI_A or ALL_A")->required()->check(CLI::IsMember(kConditionNames));
    hm->add_option("--out", hm_out, "Output CSV (stdout when omitted)");

    std::string rp_in;
    bool rp_check = false;
    auto* rp = app.add_subcommand("replay", "Re-simulate a record from its header");
    rp->add_option("--in", rp_in, "NDJSON record")->required()->check(CLI::ExistingFile);
    rp->add_flag("--check", rp_check, "Compare the re-simulation byte for byte")->required();

    ServerConfig sv_cfg = ServerConfig{};
    int sv_port = -1;
    std::string sv_data, sv_bind;
    auto* sv = app.add_subcommand("serve", "Run the WebSocket session server");
    sv->add_option("--port", sv_port, "TCP port (env BCIH_PORT)")->check(CLI::Range(0, 65535));
    sv->add_option("--bind", sv_bind, "Bind address");
    sv->add_option("--data-dir", sv_data, "Directory for NDJSON dumps (env BCIH_DATA_DIR)");
    sv->add_option("--max-sessions", sv_cfg.max_sessions, "Concurrent session limit")->check(CLI::PositiveNumber);
    sv->add_option("--input-timeout", sv_cfg.input_timeout, "Seconds without input before pausing")->check(CLI::PositiveNumber);
    sv->add_option("--seed", sv_cfg.seed, "Seed of the served subject");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cal) {
            ExperimentConfig cfg;
            cfg.plan = make_plan(1, 1, cal_seed);
            const auto prof = operator_profile(cfg, 0);
            auto result = calibrate_subject(prof.subject, prof.operator_config, cal_seconds, cfg.calibration);
            const Bundle b{result.model, prof.subject, prof.operator_config};
            write_file(cal_out, calibration_bundle(b, cal_seed, result.diagnostics).dump() + "\n");
            out << fmt::format("calibrated: {} + {} windows, training accuracy {:.3f}, model {}\n",
                               result.diagnostics.windows_low, result.diagnostics.windows_high,
                               result.diagnostics.training_accuracy, model_hash(result.model));
        } else if (*rt) {
            const Bundle b = load_bundle(rt_model, rt_seed);
            TrialSetup setup;
            setup.scene = std::make_shared<const Scene>(build_scene());
            setup.model = std::make_shared<const PipelineModel>(b.model);
            setup.condition = condition_from_string(rt_condition);
            setup.operator_config = b.operator_config;
            setup.subject = b.subject;
            setup.seed = rt_seed;
            setup.timeout = rt_timeout;
            const auto record = run_trial(setup);
            const std::string text = to_ndjson(record);
            if (rt_out.empty()) out << text;
            else write_file(rt_out, text);
            err << fmt::format("{} seed {}: {} collisions, {:.1f} s, {}\n", rt_condition, rt_seed,
                               record.collisions.size(), record.duration,
                               record.outcome == Outcome::Completed ? "completed" : "timeout");
        } else if (*ex) {
            json j = parse_json(read_file(ex_config), ex_config);
            if (ex_ops > 0) j["n_operators"] = ex_ops;
            if (ex_trials > 0) j["trials_per_condition"] = ex_trials;
            if (ex_ops > 0 && j.contains("orders")) j.erase("orders");
            const auto cfg = experiment_config_from_json(j);
            const auto result = run_experiment(cfg, [&err](const TrialRun& r) {
                err << fmt::format("operator {} {} trial {}: {} collisions\n", r.op, to_string(r.record.condition),
                                   r.trial, r.record.collisions.size());
            });
            const auto stats = compute_stats(result.table);
            export_reports(result, stats, ex_out);
            out << summary_markdown(result, stats);
            if (result.runs.empty()) throw CalibrationError("no operator could be calibrated");
        } else if (*hm) {
            const auto records = load_archive(hm_in);
            if (records.empty()) throw InputError("no records found under " + hm_in);
            const auto setup = setup_from_header(records.front().header);
            std::vector<const TrialRecord*> ptrs;
            for (const auto& r : records) ptrs.push_back(&r);
            const auto grid = build_heatmap(ptrs, *setup.scene, condition_from_string(hm_condition));
            const std::string csv = heatmap_csv(grid);
            if (hm_out.empty()) out << csv;
            else write_file(hm_out, csv);
        } else if (*rp) {
            const auto report = replay_check(read_file(rp_in));
            if (report.identical) {
                out << "replay: identical\n";
                return 0;
            }
            err << fmt::format("replay: first divergence at line {}\n  recorded:  {}\n  simulated: {}\n",
                               report.first_divergent_line, report.actual, report.expected);
            return 1;
        } else if (*sv) {
            sv_cfg = [&] {
                ServerConfig c = apply_env_overrides(sv_cfg);
                if (sv_port >= 0) c.port = static_cast<unsigned short>(sv_port);
                if (!sv_bind.empty()) c.bind_address = sv_bind;
                if (!sv_data.empty()) c.data_dir = sv_data;
                return c;
            }();
            err << "calibrating the served subject...\n";
            SessionServer server(sv_cfg, default_resources(sv_cfg.seed));
            server.start();
            out << fmt::format("listening on ws://{}:{}/session\n", sv_cfg.bind_address, server.port()) << std::flush;
            static SessionServer* active = &server;
            std::signal(SIGINT, [](int) { g_stop = 1; active->stop(); });
            std::signal(SIGTERM, [](int) { g_stop = 1; active->stop(); });
            server.run();
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace bcih
