#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "bcih/json_util.hpp"

namespace bcih {

inline constexpr int kNumChannels = 16;
inline constexpr double kDefaultSampleRate = 512.0;

using ChannelMatrix = Eigen::Matrix<double, kNumChannels, kNumChannels>;

/// Ordered electrode labels plus the acquisition rate.
struct ChannelLayout {
    std::array<std::string, kNumChannels> names{"Fp1", "Fp2", "F7", "F8", "T7", "T8",
                                                "F3",  "F4",  "C3", "C4", "P3", "P4",
                                                "O1",  "O2",  "Pz", "Cz"};
    double sample_rate = kDefaultSampleRate;

    /// Throws InputError for unknown labels.
    int index_of(std::string_view name) const;
    /// Throws ConfigError when names are not distinct or the rate is not positive.
    void validate() const;
};

std::shared_ptr<const ChannelLayout> standard_layout();

/// Default background mixing: unit-norm rows with neighbour coupling that
/// decays with electrode index distance.
ChannelMatrix default_mixing();

struct SynthConfig {
    std::uint64_t seed = 0;
    double alpha_center = 10.0;
    double theta_center = 6.0;
    double alpha_base_amp = 10.0;
    double theta_base_amp = 6.0;
    double alpha_suppression_gain = 0.5;
    double theta_boost_gain = 0.8;
    double pink_noise_amp = 4.0;
    double white_noise_amp = 1.0;
    ChannelMatrix mixing = default_mixing();

    void validate() const;
};

json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const json& j);

/// Contiguous chunk of multichannel samples in microvolts (rows = channels).
struct EegBlock {
    double start_time = 0.0;
    Eigen::MatrixXd samples;
    std::shared_ptr<const ChannelLayout> layout;

    Eigen::Index size() const { return samples.cols(); }
    double duration() const { return static_cast<double>(samples.cols()) / layout->sample_rate; }
};

/// Fixed-coefficient 1/f shaping filter (Kellet's refined pink filter).
struct PinkFilter {
    std::array<double, 7> b{};

    double step(double white);
    bool operator==(const PinkFilter&) const = default;
};

/// Complete generator state. Two states built from equal inputs compare equal.
struct SynthState {
    std::mt19937_64 rng;
    double alpha_phase = 0.0;
    double theta_phase = 0.0;
    std::array<PinkFilter, kNumChannels> pink{};
    double last_workload = -1.0;  // < 0 until the first block
    std::int64_t samples_emitted = 0;

    bool operator==(const SynthState&) const = default;
};

/// Seedable 16-channel EEG generator whose alpha and theta source
/// amplitudes follow a latent workload in [0, 1].
class EegSynth {
public:
    EegSynth(SynthConfig config, std::shared_ptr<const ChannelLayout> layout = standard_layout());

    /// Generates `n_samples` samples. The workload is linearly interpolated
    /// from the previous block's value to `workload` across the block.
    EegBlock step(double workload, Eigen::Index n_samples);

    const SynthState& state() const { return state_; }
    const SynthConfig& config() const { return config_; }
    const ChannelLayout& layout() const { return *layout_; }
    double time() const;

    /// Spatial projection weights of the two rhythmic sources.
    static Eigen::Matrix<double, kNumChannels, 1> alpha_topography(const ChannelLayout& layout);
    static Eigen::Matrix<double, kNumChannels, 1> theta_topography(const ChannelLayout& layout);

private:
    SynthConfig config_;
    std::shared_ptr<const ChannelLayout> layout_;
    SynthState state_;
    double pink_scale_ = 1.0;
    Eigen::Matrix<double, kNumChannels, 1> alpha_topo_;
    Eigen::Matrix<double, kNumChannels, 1> theta_topo_;
};

/// Average power (uV^2) of `channel` inside `band` = [low, high] Hz, from a
/// Hann-windowed periodogram integrated over the band's bins.
double band_power(const EegBlock& block, std::array<double, 2> band, std::string_view channel);

}  // namespace bcih
