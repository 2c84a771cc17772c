#include "bcih/eeg_synth.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Per-sample phase jitter of the rhythmic sources (radians); broadens the
// spectral lines slightly so they are not pure tones.
constexpr double kPhaseJitter = 0.01;

bool all_finite_nonnegative(std::initializer_list<double> xs) {
    for (double x : xs)
        if (!std::isfinite(x) || x < 0.0) return false;
    return true;
}

// Output standard deviation of the pink filter for unit-variance white input,
// from the energy of its impulse response.
double pink_gain() {
    PinkFilter f;
    double energy = 0.0;
    double y = f.step(1.0);
    energy += y * y;
    for (int i = 0; i < 200000; ++i) {
        y = f.step(0.0);
        energy += y * y;
    }
    return std::sqrt(energy);
}

}  // namespace

int ChannelLayout::index_of(std::string_view name) const {
    for (int i = 0; i < kNumChannels; ++i)
        if (names[static_cast<std::size_t>(i)] == name) return i;
    throw InputError("unknown channel '" + std::string(name) + "'");
}

void ChannelLayout::validate() const {
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != names.size()) throw ConfigError("channel names must be distinct");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
        throw ConfigError("sample rate must be positive");
}

std::shared_ptr<const ChannelLayout> standard_layout() {
    static const auto layout = std::make_shared<const ChannelLayout>();
    return layout;
}

ChannelMatrix default_mixing() {
    ChannelMatrix m;
    for (int i = 0; i < kNumChannels; ++i)
        for (int j = 0; j < kNumChannels; ++j)
            m(i, j) = i == j ? 1.0 : 0.35 * std::exp(-std::abs(i - j) / 1.5);
    m.rowwise().normalize();
    return m;
}

void SynthConfig::validate() const {
    if (!all_finite_nonnegative({alpha_base_amp, theta_base_amp, pink_noise_amp, white_noise_amp}))
        throw ConfigError("amplitudes must be finite and non-negative");
    if (!all_finite_nonnegative({alpha_center, theta_center}) || alpha_center <= 0.0 ||
        theta_center <= 0.0)
        throw ConfigError("rhythm centers must be positive");
    if (!std::isfinite(alpha_suppression_gain) || alpha_suppression_gain < 0.0 ||
        alpha_suppression_gain > 1.0)
        throw ConfigError("alpha_suppression_gain must lie in [0, 1]");
    if (!std::isfinite(theta_boost_gain) || theta_boost_gain < 0.0)
        throw ConfigError("theta_boost_gain must be non-negative");
    if (!mixing.allFinite()) throw ConfigError("mixing matrix has non-finite entries");
    Eigen::JacobiSVD<ChannelMatrix> svd(mixing);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(kNumChannels - 1) <= 1e-10 * sv(0))
        throw ConfigError("mixing matrix is singular (rank < 16)");
}

json to_json(const SynthConfig& c) {
    json mixing = json::array();
    for (int r = 0; r < kNumChannels; ++r) {
        json row = json::array();
        for (int col = 0; col < kNumChannels; ++col) row.push_back(c.mixing(r, col));
        mixing.push_back(std::move(row));
    }
    return {{"seed", c.seed},
            {"alpha_center", c.alpha_center},
            {"theta_center", c.theta_center},
            {"alpha_base_amp", c.alpha_base_amp},
            {"theta_base_amp", c.theta_base_amp},
            {"alpha_suppression_gain", c.alpha_suppression_gain},
            {"theta_boost_gain", c.theta_boost_gain},
            {"pink_noise_amp", c.pink_noise_amp},
            {"white_noise_amp", c.white_noise_amp},
            {"mixing", std::move(mixing)}};
}

SynthConfig synth_config_from_json(const json& j) {
    SynthConfig c;
    c.seed = j.value("seed", c.seed);
    c.alpha_center = j.value("alpha_center", c.alpha_center);
    c.theta_center = j.value("theta_center", c.theta_center);
    c.alpha_base_amp = j.value("alpha_base_amp", c.alpha_base_amp);
    c.theta_base_amp = j.value("theta_base_amp", c.theta_base_amp);
    c.alpha_suppression_gain = j.value("alpha_suppression_gain", c.alpha_suppression_gain);
    c.theta_boost_gain = j.value("theta_boost_gain", c.theta_boost_gain);
    c.pink_noise_amp = j.value("pink_noise_amp", c.pink_noise_amp);
    c.white_noise_amp = j.value("white_noise_amp", c.white_noise_amp);
    if (j.contains("mixing")) {
        const auto& m = j.at("mixing");
        if (m.size() != kNumChannels) throw ConfigError("mixing must have 16 rows");
        for (int r = 0; r < kNumChannels; ++r) {
            if (m[r].size() != kNumChannels) throw ConfigError("mixing must have 16 columns");
            for (int col = 0; col < kNumChannels; ++col) c.mixing(r, col) = m[r][col].get<double>();
        }
    }
    return c;
}

double PinkFilter::step(double white) {
    b[0] = 0.99886 * b[0] + white * 0.0555179;
    b[1] = 0.99332 * b[1] + white * 0.0750759;
    b[2] = 0.96900 * b[2] + white * 0.1538520;
    b[3] = 0.86650 * b[3] + white * 0.3104856;
    b[4] = 0.55000 * b[4] + white * 0.5329522;
    b[5] = -0.7616 * b[5] - white * 0.0168980;
    const double out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
    b[6] = white * 0.115926;
    return out;
}

Eigen::Matrix<double, kNumChannels, 1> EegSynth::alpha_topography(const ChannelLayout& layout) {
    Eigen::Matrix<double, kNumChannels, 1> w;
    w.setConstant(0.1);
    for (const char* n : {"C3", "C4", "T7", "T8"}) w(layout.index_of(n)) = 0.3;
    for (const char* n : {"P3", "P4", "O1", "O2", "Pz"}) w(layout.index_of(n)) = 1.0;
    return w;
}

Eigen::Matrix<double, kNumChannels, 1> EegSynth::theta_topography(const ChannelLayout& layout) {
    Eigen::Matrix<double, kNumChannels, 1> w;
    w.setConstant(0.1);
    for (const char* n : {"F7", "F8", "C3", "C4"}) w(layout.index_of(n)) = 0.3;
    for (const char* n : {"Fp1", "Fp2", "F3", "F4", "Cz"}) w(layout.index_of(n)) = 1.0;
    return w;
}

EegSynth::EegSynth(SynthConfig config, std::shared_ptr<const ChannelLayout> layout)
    : config_(std::move(config)), layout_(std::move(layout)) {
    if (!layout_) throw ConfigError("layout is required");
    layout_->validate();
    config_.validate();
    state_.rng.seed(config_.seed);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    state_.alpha_phase = phase(state_.rng);
    state_.theta_phase = phase(state_.rng);
    static const double gain = pink_gain();
    pink_scale_ = 1.0 / gain;
    alpha_topo_ = alpha_topography(*layout_);
    theta_topo_ = theta_topography(*layout_);
}

double EegSynth::time() const {
    return static_cast<double>(state_.samples_emitted) / layout_->sample_rate;
}

EegBlock EegSynth::step(double workload, Eigen::Index n_samples) {
    if (!std::isfinite(workload) || workload < 0.0 || workload > 1.0)
        throw InputError("workload must lie in [0, 1]");
    if (n_samples < 1) throw InputError("n_samples must be >= 1");

    const double fs = layout_->sample_rate;
    const double from = state_.last_workload < 0.0 ? workload : state_.last_workload;
    const double d_alpha = kTwoPi * config_.alpha_center / fs;
    const double d_theta = kTwoPi * config_.theta_center / fs;

    EegBlock block;
    block.start_time = time();
    block.layout = layout_;
    block.samples.resize(kNumChannels, n_samples);

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Matrix<double, kNumChannels, 1> pink;
    for (Eigen::Index i = 0; i < n_samples; ++i) {
        const double w = from + (workload - from) * static_cast<double>(i + 1) /
                                    static_cast<double>(n_samples);
        const double a_amp = config_.alpha_base_amp * (1.0 - config_.alpha_suppression_gain * w);
        const double t_amp = config_.theta_base_amp * (1.0 + config_.theta_boost_gain * w);

        state_.alpha_phase += d_alpha + kPhaseJitter * gauss(state_.rng);
        state_.theta_phase += d_theta + kPhaseJitter * gauss(state_.rng);
        state_.alpha_phase = std::fmod(state_.alpha_phase, kTwoPi);
        state_.theta_phase = std::fmod(state_.theta_phase, kTwoPi);

        for (int c = 0; c < kNumChannels; ++c)
            pink(c) = state_.pink[static_cast<std::size_t>(c)].step(gauss(state_.rng)) * pink_scale_;

        auto col = block.samples.col(i);
        col.noalias() = config_.pink_noise_amp * (config_.mixing * pink);
        col += alpha_topo_ * (a_amp * std::sin(state_.alpha_phase));
        col += theta_topo_ * (t_amp * std::sin(state_.theta_phase));
        for (int c = 0; c < kNumChannels; ++c) col(c) += config_.white_noise_amp * gauss(state_.rng);
    }
    state_.last_workload = workload;
    state_.samples_emitted += n_samples;
    return block;
}

double band_power(const EegBlock& block, std::array<double, 2> band, std::string_view channel) {
    const int ch = block.layout->index_of(channel);
    const double fs = block.layout->sample_rate;
    if (!(band[0] > 0.0) || !(band[1] < fs / 2.0) || !(band[0] < band[1]))
        throw InputError("band must satisfy 0 < low < high < fs/2");
    const Eigen::Index n = block.samples.cols();
    if (n < 2) return 0.0;

    Eigen::VectorXd w(n);
    double w_energy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i) = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
        w_energy += w(i) * w(i);
    }
    const Eigen::VectorXd x = block.samples.row(ch).transpose().cwiseProduct(w);

    const double df = fs / static_cast<double>(n);
    const auto k_lo = static_cast<Eigen::Index>(std::ceil(band[0] / df));
    const auto k_hi = static_cast<Eigen::Index>(std::floor(band[1] / df));
    double power = 0.0;
    for (Eigen::Index k = k_lo; k <= k_hi; ++k) {
        // Direct DFT bin via a rotating phasor.
        const double omega = kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        double re = 0.0, im = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ph = omega * static_cast<double>(i);
            re += x(i) * std::cos(ph);
            im -= x(i) * std::sin(ph);
        }
        // One-sided periodogram normalised so a sine of amplitude a sums to a^2/2.
        power += 2.0 * (re * re + im * im) / (static_cast<double>(n) * w_energy);
    }
    return power;
}

}  // namespace bcih
