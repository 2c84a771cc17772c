#include <doctest.h>

#include "bcih/errors.hpp"
#include "bcih/pipeline.hpp"

using namespace bcih;

namespace {

std::vector<EegBlock> constant_stream(std::uint64_t seed, double workload, double seconds, double scale = 1.0) {
    SynthConfig c;
    c.seed = seed;
    EegSynth s(c);
    std::vector<EegBlock> out;
    const auto n = static_cast<Eigen::Index>(seconds * 512);
    for (Eigen::Index done = 0; done < n;) {
        const Eigen::Index len = std::min<Eigen::Index>(512, n - done);
        auto b = s.step(workload, len);
        b.samples *= scale;
        out.push_back(std::move(b));
        done += len;
    }
    return out;
}

double fraction_of(const std::vector<RawLabel>& labels, int value) {
    std::size_t k = 0;
    for (const auto& l : labels) k += l.label == value;
    return static_cast<double>(k) / static_cast<double>(labels.size());
}

struct Trained {
    std::vector<EegBlock> low, high;
    CalibrationResult result;
};

const Trained& trained() {
    static const Trained t = [] {
        Trained x;
        x.low = constant_stream(101, 0.1, 60);
        x.high = constant_stream(202, 0.9, 60);
        x.result = calibrate_pipeline(x.low, x.high);
        return x;
    }();
    return t;
}

}  // namespace

TEST_CASE("calibration window counts and model shape") {
    const auto& t = trained();
    CHECK(t.result.diagnostics.windows_low == 591);
    CHECK(t.result.diagnostics.windows_high == 591);
    const auto& m = t.result.model;
    CHECK_NOTHROW(m.validate());
    CHECK(m.csp.size() == 8);
    for (const auto& b : m.csp) CHECK(b.filters.rows() == 6);
    CHECK(m.selected.size() == 6);
    CHECK(m.lda.weights.size() == 6);
    CHECK(t.result.diagnostics.training_accuracy >= 0.9);
}

TEST_CASE("held-out accuracy on fresh synthetic data") {
    const auto& model = trained().result.model;
    const auto low = stream_classify(model, constant_stream(303, 0.1, 30));
    const auto high = stream_classify(model, constant_stream(404, 0.9, 30));
    const double acc = 0.5 * (fraction_of(low, -1) + fraction_of(high, 1));
    CHECK(acc >= 0.9);
    // Resubstitution on the high training stream.
    CHECK(fraction_of(stream_classify(model, trained().high), 1) >= 0.9);
}

TEST_CASE("indistinguishable classes train to chance") {
    const auto same = constant_stream(7, 0.5, 60);
    const auto r = calibrate_pipeline(same, same);
    CHECK(r.diagnostics.training_accuracy == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::abs(r.diagnostics.training_accuracy - 0.5) <= 0.1);
}

TEST_CASE("insufficient calibration data names the shortfall") {
    const auto low = constant_stream(1, 0.1, 59.5);
    const auto high = constant_stream(2, 0.9, 60);
    try {
        (void)calibrate_pipeline(low, high);
        FAIL("expected CalibrationError");
    } catch (const CalibrationError& e) {
        CHECK(std::string(e.what()).find("59.5") != std::string::npos);
    }
}

TEST_CASE("stream labels: count, values and rate checks") {
    const auto& model = trained().result.model;
    const auto labels = stream_classify(model, constant_stream(5, 0.5, 10));
    CHECK(labels.size() == 91);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CHECK((labels[i].label == 1 || labels[i].label == -1));
        CHECK(labels[i].label == (labels[i].discriminant >= 0 ? 1 : -1));
        if (i > 0) CHECK(labels[i].time > labels[i - 1].time);
    }
    CHECK(labels.front().time == doctest::Approx(1.0));

    auto layout = std::make_shared<ChannelLayout>(*standard_layout());
    layout->sample_rate = 256.0;
    EegBlock wrong{0.0, Eigen::MatrixXd::Zero(16, 256), layout};
    StreamClassifier sc(std::make_shared<PipelineModel>(model));
    CHECK_THROWS_AS(sc.push(wrong), InputError);
}

TEST_CASE("model JSON round trip keeps labels identical on a 60 s stream") {
    const auto& model = trained().result.model;
    const json j = to_json(model);
    CHECK(j.contains("version"));
    const auto back = pipeline_model_from_json(json::parse(j.dump()));
    CHECK(model_hash(back) == model_hash(model));
    const auto stream = constant_stream(9, 0.5, 60);
    const auto a = stream_classify(model, stream), b = stream_classify(back, stream);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label == b[i].label);

    json missing = j;
    missing.erase("version");
    CHECK_THROWS_AS(pipeline_model_from_json(missing), ConfigError);
    json future = j;
    future["version"] = 99;
    CHECK_THROWS_AS(pipeline_model_from_json(future), ConfigError);
}

TEST_CASE("scaling all EEG by a constant leaves labels unchanged") {
    const double c = 3.7;
    const auto& base = trained();
    const auto scaled = calibrate_pipeline(constant_stream(101, 0.1, 60, c), constant_stream(202, 0.9, 60, c));
    CHECK(scaled.model.selected == base.result.model.selected);
    for (std::size_t b = 0; b < 8; ++b) {
        // Directions match; norms scale by 1/c.
        const Eigen::MatrixXd ratio = scaled.model.csp[b].filters * c - base.result.model.csp[b].filters;
        CHECK(ratio.cwiseAbs().maxCoeff() < 1e-6 * base.result.model.csp[b].filters.cwiseAbs().maxCoeff());
    }
    const auto test = constant_stream(55, 0.5, 20), test_scaled = constant_stream(55, 0.5, 20, c);
    const auto a = stream_classify(base.result.model, test);
    const auto b = stream_classify(scaled.model, test_scaled);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label == b[i].label);
}

TEST_CASE("workload index emitted once per second after warm-up") {
    WorkloadEstimator est(std::make_shared<PipelineModel>(trained().result.model));
    SynthConfig cfg;
    cfg.seed = 77;
    EegSynth synth(cfg);
    std::vector<double> index_times;
    std::size_t labels = 0;
    for (int j = 0; j < 300; ++j) {  // 30 s in 51/52-sample blocks
        const Eigen::Index n = (512 * (j + 1)) / 10 - (512 * j) / 10;
        const auto u = est.push(synth.step(0.9, n));
        labels += u.labels.size();
        if (u.index) index_times.push_back(u.index->time);
    }
    CHECK(labels == 291);
    REQUIRE(index_times.size() == 29);
    // Window 9 ends at sample 512 + floor(9 * 51.2) = 972.
    CHECK(index_times.front() == doctest::Approx(972.0 / 512.0));
    for (std::size_t i = 1; i < index_times.size(); ++i) CHECK(index_times[i] - index_times[i - 1] == doctest::Approx(1.0));
    CHECK(est.latest()->value == 1);
}
