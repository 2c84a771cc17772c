#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "bcih/eeg_synth.hpp"
#include "bcih/errors.hpp"
#include "oracles.hpp"

using namespace bcih;

namespace {

EegBlock generate(SynthConfig cfg, double workload, double seconds) {
    EegSynth s(cfg);
    return s.step(workload, static_cast<Eigen::Index>(seconds * 512));
}

Eigen::RowVectorXd channel(const EegBlock& b, const char* name) {
    return b.samples.row(b.layout->index_of(name));
}

}  // namespace

TEST_CASE("layout has the sixteen named channels at 512 Hz") {
    const auto layout = standard_layout();
    CHECK(layout->names.size() == 16);
    CHECK(layout->names[0] == "Fp1");
    CHECK(layout->names[15] == "Cz");
    CHECK(layout->sample_rate == 512.0);
    CHECK(layout->index_of("O1") == 12);
    CHECK_THROWS_AS(layout->index_of("Oz"), InputError);
    ChannelLayout dup = *layout;
    dup.names[1] = "Fp1";
    CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("equal seeds give identical state and samples") {
    SynthConfig c;
    c.seed = 7;
    EegSynth a(c), b(c);
    CHECK(a.state() == b.state());
    for (int i = 0; i < 5; ++i) {
        const auto x = a.step(0.3 * i / 4.0, 51 + i);
        const auto y = b.step(0.3 * i / 4.0, 51 + i);
        CHECK(x.samples == y.samples);
    }
    CHECK(a.state() == b.state());
    SynthConfig other = c;
    other.seed = 8;
    EegSynth d(other);
    CHECK(d.step(0.0, 64).samples != EegSynth(c).step(0.0, 64).samples);
}

TEST_CASE("identity mixing keeps background sources on their own channel") {
    // Correlation of first differences: pink noise has long memory, so raw
    // sample correlations of independent channels wander far from zero.
    auto correlation = [](const EegBlock& b, int i, int j) {
        const Eigen::Index n = b.samples.cols() - 1;
        Eigen::RowVectorXd x = b.samples.row(i).tail(n) - b.samples.row(i).head(n);
        Eigen::RowVectorXd y = b.samples.row(j).tail(n) - b.samples.row(j).head(n);
        x.array() -= x.mean();
        y.array() -= y.mean();
        return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
    };
    SynthConfig c;
    c.seed = 3;
    c.alpha_base_amp = c.theta_base_amp = c.white_noise_amp = 0.0;
    c.mixing = ChannelMatrix::Identity();
    const auto ident = generate(c, 0.0, 20.0);
    c.mixing = default_mixing();
    const auto mixed = generate(c, 0.0, 20.0);
    for (int i = 0; i + 1 < 16; ++i) {
        CHECK(std::abs(correlation(ident, i, i + 1)) < 0.1);
        CHECK(correlation(mixed, i, i + 1) > 0.2);
    }
}

TEST_CASE("configuration errors") {
    SynthConfig c;
    c.mixing.row(3) = c.mixing.row(2);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(EegSynth{c}, ConfigError);
    SynthConfig d;
    d.alpha_base_amp = -1.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = SynthConfig{};
    d.pink_noise_amp = std::nan("");
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d = SynthConfig{};
    d.alpha_suppression_gain = 1.5;
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("step preconditions and block timing") {
    EegSynth s(SynthConfig{});
    CHECK_THROWS_AS(s.step(1.2, 10), InputError);
    CHECK_THROWS_AS(s.step(-0.1, 10), InputError);
    CHECK_THROWS_AS(s.step(0.5, 0), InputError);
    const auto b = s.step(0.5, 512);
    CHECK(b.samples.rows() == 16);
    CHECK(b.duration() == 1.0);
    CHECK(b.start_time == 0.0);
    CHECK(b.samples.allFinite());
    const auto c = s.step(0.5, 256);
    CHECK(c.start_time == 1.0);
    CHECK(s.time() == 1.5);
}

TEST_CASE("JSON round trip of the configuration") {
    SynthConfig c;
    c.seed = 99;
    c.theta_boost_gain = 0.7;
    const auto back = synth_config_from_json(to_json(c));
    CHECK(back.seed == 99);
    CHECK(back.theta_boost_gain == 0.7);
    CHECK(back.mixing == c.mixing);
}

TEST_CASE("alpha at O1 drops and theta at Fp1 rises with workload (Welch oracle)") {
    SynthConfig c;
    c.seed = 11;
    const auto low = generate(c, 0.0, 10.0);
    const auto high = generate(c, 1.0, 10.0);
    const double a_low = oracle::welch_band_power(channel(low, "O1"), 512, 8, 12);
    const double a_high = oracle::welch_band_power(channel(high, "O1"), 512, 8, 12);
    const double t_low = oracle::welch_band_power(channel(low, "Fp1"), 512, 3, 7);
    const double t_high = oracle::welch_band_power(channel(high, "Fp1"), 512, 3, 7);
    CHECK(a_low > a_high);
    CHECK(t_high > t_low);
}

TEST_CASE("band power monotone in workload over 30 s") {
    SynthConfig c;
    c.seed = 5;
    double prev_alpha = 1e300, prev_theta = -1.0;
    for (double w : {0.0, 0.5, 1.0}) {
        const auto b = generate(c, w, 30.0);
        const double alpha = oracle::welch_band_power(channel(b, "O1"), 512, 8, 12);
        const double theta = oracle::welch_band_power(channel(b, "Fp1"), 512, 3, 7);
        CHECK(alpha < prev_alpha);
        CHECK(theta > prev_theta);
        prev_alpha = alpha;
        prev_theta = theta;
    }
}

TEST_CASE("noise floor does not depend on workload when gains are zero") {
    SynthConfig c;
    c.seed = 21;
    c.alpha_suppression_gain = 0.0;
    c.theta_boost_gain = 0.0;
    const auto a = generate(c, 0.0, 60.0);
    const auto b = generate(c, 1.0, 60.0);
    for (const char* ch : {"O1", "Fp1", "Cz"}) {
        for (auto band : {std::array<double, 2>{3, 7}, std::array<double, 2>{8, 12}, std::array<double, 2>{20, 24}}) {
            const double pa = band_power(a, band, ch), pb = band_power(b, band, ch);
            CHECK(std::abs(pa - pb) / pa < 0.05);
        }
    }
}

TEST_CASE("band_power of a pure sine is a^2/2") {
    for (double amp : {1.0, 3.0, 10.0}) {
        EegBlock b{0.0, Eigen::MatrixXd::Zero(16, 512 * 4), standard_layout()};
        b.samples.row(12) = oracle::sine(10.0, amp, 512, 512 * 4, 0.3);
        const double p = band_power(b, {8, 12}, "O1");
        CHECK(p == doctest::Approx(amp * amp / 2.0).epsilon(0.05));
        // Independent Welch estimate agrees.
        CHECK(oracle::welch_band_power(b.samples.row(12), 512, 8, 12) == doctest::Approx(amp * amp / 2.0).epsilon(0.05));
    }
}

TEST_CASE("band_power edge cases") {
    EegBlock zero{0.0, Eigen::MatrixXd::Zero(16, 1024), standard_layout()};
    CHECK(band_power(zero, {8, 12}, "O1") == 0.0);
    CHECK_THROWS_AS(band_power(zero, {8, 12}, "XX"), InputError);
    CHECK_THROWS_AS(band_power(zero, {0, 12}, "O1"), InputError);
    CHECK_THROWS_AS(band_power(zero, {8, 300}, "O1"), InputError);

    SynthConfig c;
    c.seed = 2;
    c.theta_base_amp = c.pink_noise_amp = c.white_noise_amp = 0.0;
    const auto alpha_only = generate(c, 0.0, 10.0);
    CHECK(band_power(alpha_only, {8, 12}, "O1") > 100.0 * band_power(alpha_only, {20, 24}, "O1"));
}
