#include "bcih/filter_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bcih/errors.hpp"

namespace bcih {

using cd = std::complex<double>;

std::complex<double> FilterCoefficients::response(double freq_hz, double fs) const {
    const cd z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
    const cd z2 = z1 * z1;
    cd h{1.0, 0.0};
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

double FilterCoefficients::max_pole_radius() const {
    double r = 0.0;
    for (const auto& s : sections) {
        // z^2 + a1 z + a2 = 0
        const cd disc = std::sqrt(cd(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
        r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
    }
    return r;
}

FilterCoefficients design_bandpass(double center, double bandwidth, int order, double fs) {
    const double lo = center - bandwidth / 2.0;
    const double hi = center + bandwidth / 2.0;
    if (order < 1) throw DesignError("filter order must be >= 1");
    if (!(fs > 0.0) || !(bandwidth > 0.0) || !(lo > 0.0) || !(hi < fs / 2.0))
        throw DesignError("band-pass edges must lie strictly inside (0, fs/2)");

    const double pi = std::numbers::pi;
    const double w_lo = 2.0 * fs * std::tan(pi * lo / fs);
    const double w_hi = 2.0 * fs * std::tan(pi * hi / fs);
    const double bw = w_hi - w_lo;
    const double w0_sq = w_lo * w_hi;

    // Low-pass prototype poles on the left half of the unit circle, then the
    // low-pass to band-pass map s -> (s^2 + w0^2) / (s * bw); keep the
    // upper-half-plane member of each conjugate pair.
    std::vector<cd> poles;
    for (int k = 1; k <= order; ++k) {
        const cd p = std::polar(1.0, pi * (2.0 * k + order - 1) / (2.0 * order));
        const cd half = p * bw / 2.0;
        const cd root = std::sqrt(half * half - w0_sq);
        for (const cd s : {half + root, half - root}) {
            const cd z = (2.0 * fs + s) / (2.0 * fs - s);
            if (z.imag() > 0.0) poles.push_back(z);
        }
    }
    if (poles.size() != static_cast<std::size_t>(order))
        throw DesignError("band too wide for second-order-section pairing");

    FilterCoefficients fc;
    for (const cd& z : poles) {
        // Each section gets one zero at z = 1 and one at z = -1.
        fc.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
    }
    // Unit gain at the digital image of the geometric center frequency.
    const double f_center = fs / pi * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
    const double g = std::pow(1.0 / std::abs(fc.response(f_center, fs)), 1.0 / order);
    for (auto& s : fc.sections) {
        s.b0 *= g;
        s.b2 *= g;
    }
    return fc;
}

std::vector<BandSpec> FilterBankSpec::default_bands() {
    std::vector<BandSpec> bands;
    for (int c = 5; c <= 12; ++c) bands.push_back({static_cast<double>(c), 4.0});
    return bands;
}

FilterBank::FilterBank(FilterBankSpec spec, int n_channels)
    : spec_(std::move(spec)), n_channels_(n_channels) {
    if (n_channels_ < 1) throw ConfigError("filter bank needs at least one channel");
    if (spec_.bands.empty()) throw ConfigError("filter bank needs at least one band");
    for (const auto& b : spec_.bands)
        coeffs_.push_back(design_bandpass(b.center, b.bandwidth, spec_.order, spec_.sample_rate));
    reset();
}

void FilterBank::reset() {
    state_.assign(coeffs_.size(), {});
    for (std::size_t b = 0; b < coeffs_.size(); ++b)
        state_[b].assign(static_cast<std::size_t>(n_channels_) * coeffs_[b].sections.size(), {0.0, 0.0});
}

std::vector<Eigen::MatrixXd> FilterBank::apply(const EegBlock& block) {
    if (block.layout && block.layout->sample_rate != spec_.sample_rate)
        throw InputError("block sample rate does not match the filter bank");
    return apply(block.samples);
}

std::vector<Eigen::MatrixXd> FilterBank::apply(const Eigen::MatrixXd& block) {
    if (block.rows() != n_channels_)
        throw InputError("block has " + std::to_string(block.rows()) + " channels, filter bank expects " +
                         std::to_string(n_channels_));
    const Eigen::Index n = block.cols();
    std::vector<Eigen::MatrixXd> out(coeffs_.size(), Eigen::MatrixXd(n_channels_, n));
    for (std::size_t b = 0; b < coeffs_.size(); ++b) {
        const auto& secs = coeffs_[b].sections;
        const std::size_t ns = secs.size();
        auto& y = out[b];
        for (int c = 0; c < n_channels_; ++c) {
            auto* st = &state_[b][static_cast<std::size_t>(c) * ns];
            for (Eigen::Index i = 0; i < n; ++i) {
                double v = block(c, i);
                for (std::size_t s = 0; s < ns; ++s) {
                    const Biquad& q = secs[s];
                    const double out_v = q.b0 * v + st[s][0];
                    st[s][0] = q.b1 * v - q.a1 * out_v + st[s][1];
                    st[s][1] = q.b2 * v - q.a2 * out_v;
                    v = out_v;
                }
                y(c, i) = v;
            }
        }
    }
    return out;
}

void WindowSpec::validate(double fs) const {
    if (!(length > 0.0) || !(overlap >= 0.0) || !(overlap < length))
        throw ConfigError("window spec requires 0 <= overlap < length");
    const double l = length * fs;
    if (std::abs(l - std::round(l)) > 1e-9) throw ConfigError("window length is not a whole number of samples");
    const double h = hop() * fs * 1000.0;
    if (std::abs(h - std::round(h)) > 1e-6 || std::round(h) < 1.0)
        throw ConfigError("window hop is not representable on the sample grid");
}

Eigen::Index WindowSpec::length_samples(double fs) const {
    return static_cast<Eigen::Index>(std::llround(length * fs));
}

std::int64_t WindowSpec::hop_millisamples(double fs) const { return std::llround(hop() * fs * 1000.0); }

std::int64_t WindowSpec::window_end(std::int64_t k, double fs) const {
    return length_samples(fs) + (k * hop_millisamples(fs)) / 1000;
}

std::int64_t WindowSpec::count(std::int64_t n_samples, double fs) const {
    const std::int64_t len = length_samples(fs);
    if (n_samples < len) return 0;
    // Largest k with floor(k * hop_ms / 1000) <= n - len.
    return ((n_samples - len + 1) * 1000 - 1) / hop_millisamples(fs) + 1;
}

std::vector<Eigen::Index> WindowSpec::starts(std::int64_t n_samples, double fs) const {
    std::vector<Eigen::Index> s;
    const std::int64_t n = count(n_samples, fs);
    s.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) s.push_back(window_end(k, fs) - length_samples(fs));
    return s;
}

SlidingWindower::SlidingWindower(WindowSpec spec, double fs, std::size_t n_bands, int n_channels,
                                 double start_time)
    : spec_(spec), fs_(fs), start_time_(start_time) {
    spec_.validate(fs_);
    len_ = spec_.length_samples(fs_);
    ring_.assign(n_bands, Eigen::MatrixXd::Zero(n_channels, len_));
    next_end_ = spec_.window_end(0, fs_);
}

Window SlidingWindower::extract() const {
    Window w;
    w.index = next_k_;
    w.end_time = start_time_ + static_cast<double>(seen_) / fs_;
    w.bands.reserve(ring_.size());
    // head_ is the oldest column once the ring is full.
    const Eigen::Index tail = len_ - head_;
    for (const auto& r : ring_) {
        Eigen::MatrixXd m(r.rows(), len_);
        m.leftCols(tail) = r.rightCols(tail);
        if (head_ > 0) m.rightCols(head_) = r.leftCols(head_);
        w.bands.push_back(std::move(m));
    }
    return w;
}

std::vector<Window> SlidingWindower::push(const std::vector<Eigen::MatrixXd>& filtered) {
    if (filtered.size() != ring_.size()) throw InputError("band count mismatch in windower");
    const Eigen::Index n = filtered.empty() ? 0 : filtered.front().cols();
    std::vector<Window> out;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < ring_.size(); ++b) ring_[b].col(head_) = filtered[b].col(i);
        head_ = (head_ + 1) % len_;
        ++seen_;
        if (seen_ == next_end_) {
            out.push_back(extract());
            ++next_k_;
            next_end_ = spec_.window_end(next_k_, fs_);
        }
    }
    return out;
}

}  // namespace bcih
