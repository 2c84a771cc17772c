#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bcih/errors.hpp"
#include "bcih/experiment.hpp"

namespace py = pybind11;
using namespace bcih;

namespace {

py::dict stat_dict(const StatResult& r) {
    py::dict d;
    d["test"] = r.test;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["n"] = r.n;
    d["exact"] = r.exact;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Workload-adaptive haptic guidance simulator (C++ core)";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DesignError>(m, "DesignError", PyExc_ValueError);
    py::register_exception<DegenerateDataError>(m, "DegenerateDataError", PyExc_ValueError);
    py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);
    py::register_exception<SceneError>(m, "SceneError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);

    m.attr("CHANNELS") = py::cast(std::vector<std::string>(standard_layout()->names.begin(), standard_layout()->names.end()));
    m.attr("SAMPLE_RATE") = kDefaultSampleRate;

    py::class_<EegSynth>(m, "EegSynth")
        .def(py::init([](std::uint64_t seed) {
                 SynthConfig c;
                 c.seed = seed;
                 return EegSynth(c);
             }),
             py::arg("seed") = 0)
        .def(
            "step", [](EegSynth& s, double workload, Eigen::Index n) { return s.step(workload, n).samples; },
            py::arg("workload"), py::arg("n_samples"), "Next block as a 16 x n array (uV).")
        .def_property_readonly("time", &EegSynth::time);

    m.def(
        "band_power",
        [](const Eigen::MatrixXd& samples, double lo, double hi, const std::string& channel) {
            EegBlock b{0.0, samples, standard_layout()};
            return band_power(b, {lo, hi}, channel);
        },
        py::arg("samples"), py::arg("low"), py::arg("high"), py::arg("channel"));

    m.def(
        "bandpass_gain",
        [](double center, double bandwidth, int order, double fs, double freq) {
            return std::abs(design_bandpass(center, bandwidth, order, fs).response(freq, fs));
        },
        py::arg("center"), py::arg("bandwidth"), py::arg("order"), py::arg("fs"), py::arg("freq"),
        "Magnitude response of the designed band-pass at `freq`.");

    m.def(
        "mutual_information", [](const std::vector<int>& a, const std::vector<int>& b) { return mutual_information(a, b); },
        py::arg("a"), py::arg("b"));

    m.def(
        "smooth_index",
        [](const std::vector<int>& labels) {
            std::vector<int> out;
            for (const auto& w : smooth_index(labels)) out.push_back(w.value);
            return out;
        },
        py::arg("labels"));

    m.def(
        "friedman_test", [](const Eigen::MatrixXd& v) { return stat_dict(friedman_test(v)); }, py::arg("values"));
    m.def(
        "wilcoxon_signed_rank",
        [](const std::vector<double>& a, const std::vector<double>& b, const std::string& alt) {
            Alternative al = alt == "less" ? Alternative::Less
                             : alt == "greater" ? Alternative::Greater
                             : alt == "two-sided" ? Alternative::TwoSided
                                                  : throw InputError("alternative must be two-sided, less or greater");
            return stat_dict(wilcoxon_signed_rank(a, b, al));
        },
        py::arg("a"), py::arg("b"), py::arg("alternative") = "two-sided");

    m.def(
        "scene_json", [](std::uint64_t seed) { return to_json(build_scene({}, seed)).dump(); }, py::arg("seed") = 0,
        "Default scene serialized as JSON.");
    m.def(
        "nearest_wall_distance",
        [](double x, double y) {
            static const Scene scene = build_scene();
            return nearest_wall_distance(scene, {x, y}).distance;
        },
        py::arg("x"), py::arg("y"), "Clearance to the nearest wall of the default scene.");
    m.def(
        "guide_magnitude", [](double d) { return GuideLaw{}.magnitude(d); }, py::arg("d"));

    m.def(
        "calibrate",
        [](std::uint64_t seed) {
            ExperimentConfig cfg;
            cfg.plan = make_plan(1, 1, seed);
            const auto prof = operator_profile(cfg, 0);
            py::gil_scoped_release release;
            const auto r = calibrate_subject(prof.subject, prof.operator_config);
            return json{{"subject", to_json(prof.subject)},
                        {"operator", to_json(prof.operator_config)},
                        {"model", to_json(r.model)},
                        {"training_accuracy", r.diagnostics.training_accuracy}}
                .dump();
        },
        py::arg("seed"), "Calibration bundle (JSON text) for the subject derived from `seed`.");

    m.def(
        "run_trial",
        [](const std::string& bundle_json, const std::string& condition, std::uint64_t seed, double timeout) {
            const json b = json::parse(bundle_json);
            TrialSetup setup;
            setup.scene = std::make_shared<const Scene>(build_scene());
            setup.model = std::make_shared<const PipelineModel>(pipeline_model_from_json(b.at("model")));
            setup.subject = synth_config_from_json(b.at("subject"));
            setup.operator_config = operator_config_from_json(b.at("operator"));
            setup.condition = condition_from_string(condition);
            setup.seed = seed;
            setup.timeout = timeout;
            py::gil_scoped_release release;
            return to_ndjson(run_trial(setup));
        },
        py::arg("bundle"), py::arg("condition"), py::arg("seed"), py::arg("timeout") = 120.0,
        "Simulates one trial; returns the NDJSON record.");

    m.def(
        "replay_check",
        [](const std::string& text) {
            ReplayReport r;
            {
                py::gil_scoped_release release;
                r = replay_check(text);
            }
            py::dict d;
            d["identical"] = r.identical;
            d["first_divergent_line"] = r.first_divergent_line;
            return d;
        },
        py::arg("ndjson"));
}
