#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "bcih/eeg_synth.hpp"

namespace bcih {

/// One second-order section, a0 normalised to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Cascade of second-order sections.
struct FilterCoefficients {
    std::vector<Biquad> sections;

    std::complex<double> response(double freq_hz, double fs) const;
    /// Largest pole modulus over all sections.
    double max_pole_radius() const;
};

/// Butterworth band-pass of prototype order `order` (2*order poles), with
/// pre-warped edges at center -/+ bandwidth/2. Throws DesignError when the
/// band does not fit strictly inside (0, fs/2).
FilterCoefficients design_bandpass(double center, double bandwidth, int order, double fs);

struct BandSpec {
    double center = 0.0;
    double bandwidth = 4.0;

    double low() const { return center - bandwidth / 2.0; }
    double high() const { return center + bandwidth / 2.0; }
};

struct FilterBankSpec {
    std::vector<BandSpec> bands = default_bands();
    int order = 4;
    double sample_rate = kDefaultSampleRate;

    static std::vector<BandSpec> default_bands();
};

/// Streaming filter bank: one independent cascade state per band and channel.
class FilterBank {
public:
    explicit FilterBank(FilterBankSpec spec = {}, int n_channels = kNumChannels);

    /// Filters `block` through every band, advancing the state. Returns one
    /// channels x n matrix per band, in band order.
    std::vector<Eigen::MatrixXd> apply(const Eigen::MatrixXd& block);
    std::vector<Eigen::MatrixXd> apply(const EegBlock& block);

    void reset();

    const FilterBankSpec& spec() const { return spec_; }
    const std::vector<FilterCoefficients>& coefficients() const { return coeffs_; }
    int n_channels() const { return n_channels_; }
    std::size_t n_bands() const { return coeffs_.size(); }

private:
    FilterBankSpec spec_;
    int n_channels_;
    std::vector<FilterCoefficients> coeffs_;
    // [band][channel * n_sections + section] -> (s1, s2) of transposed DF-II
    std::vector<std::vector<std::array<double, 2>>> state_;
};

/// Window geometry. The hop may be a non-integer number of samples (0.1 s at
/// 512 Hz is 51.2); window k then ends at sample L + floor(k * hop * fs).
struct WindowSpec {
    double length = 1.0;
    double overlap = 0.9;

    double hop() const { return length - overlap; }
    /// Throws ConfigError unless 0 <= overlap < length, length*fs is an
    /// integer and hop*fs is a multiple of 1/1000 sample.
    void validate(double fs) const;
    Eigen::Index length_samples(double fs) const;
    /// hop*fs*1000 as an exact integer.
    std::int64_t hop_millisamples(double fs) const;
    /// Exclusive end sample of window k.
    std::int64_t window_end(std::int64_t k, double fs) const;
    /// Number of complete windows in a stream of `n_samples`.
    std::int64_t count(std::int64_t n_samples, double fs) const;
    /// Start sample of every window in a stream of `n_samples`.
    std::vector<Eigen::Index> starts(std::int64_t n_samples, double fs) const;
};

/// One window across all bands: bands[b] is channels x L.
struct Window {
    std::int64_t index = 0;
    double end_time = 0.0;
    std::vector<Eigen::MatrixXd> bands;
};

/// Buffers band-filtered samples and emits a window at every hop boundary
/// once a full window length has been seen.
class SlidingWindower {
public:
    SlidingWindower(WindowSpec spec, double fs, std::size_t n_bands, int n_channels,
                    double start_time = 0.0);

    std::vector<Window> push(const std::vector<Eigen::MatrixXd>& filtered);

    std::int64_t samples_seen() const { return seen_; }
    std::int64_t windows_emitted() const { return next_k_; }

private:
    Window extract() const;

    WindowSpec spec_;
    double fs_;
    double start_time_;
    Eigen::Index len_;
    std::vector<Eigen::MatrixXd> ring_;  // per band, channels x L
    Eigen::Index head_ = 0;              // next write column
    std::int64_t seen_ = 0;
    std::int64_t next_k_ = 0;
    std::int64_t next_end_;
};

}  // namespace bcih
