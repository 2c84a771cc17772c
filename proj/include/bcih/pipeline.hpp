#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bcih/classifier.hpp"
#include "bcih/eeg_synth.hpp"
#include "bcih/filter_bank.hpp"
#include "bcih/json_util.hpp"

namespace bcih {

inline constexpr int kModelFormatVersion = 1;

/// Frozen output of calibration.
struct PipelineModel {
    int version = kModelFormatVersion;
    FilterBankSpec filter_bank;
    WindowSpec window;
    int n_channels = kNumChannels;
    std::vector<CspBand> csp;  // one per band
    std::vector<FeatureCouple> selected;
    LdaModel lda;

    /// Throws ConfigError on inconsistent dimensions.
    void validate() const;
    /// The selected features of one window (bands x channels x L).
    Eigen::VectorXd features(const std::vector<Eigen::MatrixXd>& window_bands) const;
};

json to_json(const PipelineModel& m);
PipelineModel pipeline_model_from_json(const json& j);
std::string model_hash(const PipelineModel& m);

struct CalibrationOptions {
    FilterBankSpec filter_bank;
    WindowSpec window;
    double covariance_shrinkage = 0.01;
    int csp_pairs = 3;
    int n_selected = 6;
    double lda_gamma = 0.1;
    double min_seconds = 60.0;
};

struct CalibrationDiagnostics {
    std::size_t windows_low = 0;
    std::size_t windows_high = 0;
    double training_accuracy = 0.0;
};

struct CalibrationResult {
    PipelineModel model;
    CalibrationDiagnostics diagnostics;
};

json to_json(const CalibrationDiagnostics& d);

/// Trains the full pipeline from a low-workload and a high-workload stream.
/// Each span is a run of contiguous blocks; each class needs at least
/// `min_seconds` of data.
CalibrationResult calibrate_pipeline(std::span<const EegBlock> low, std::span<const EegBlock> high,
                                     const CalibrationOptions& options = {});

struct RawLabel {
    double time = 0.0;
    int label = 0;
    double discriminant = 0.0;
};

/// Online classifier: filters, windows and labels a live stream.
class StreamClassifier {
public:
    explicit StreamClassifier(std::shared_ptr<const PipelineModel> model, double start_time = 0.0);

    std::vector<RawLabel> push(const EegBlock& block);
    std::vector<RawLabel> push(const Eigen::MatrixXd& samples);

    const PipelineModel& model() const { return *model_; }

private:
    std::shared_ptr<const PipelineModel> model_;
    FilterBank bank_;
    SlidingWindower windower_;
};

/// Raw labels for a whole stream (convenience wrapper over StreamClassifier).
std::vector<RawLabel> stream_classify(const PipelineModel& model, std::span<const EegBlock> stream);

/// Classifier plus median smoother: raw labels at 10 Hz, index at 1 Hz.
class WorkloadEstimator {
public:
    explicit WorkloadEstimator(std::shared_ptr<const PipelineModel> model);

    struct Update {
        std::vector<RawLabel> labels;
        std::optional<WorkloadIndex> index;
    };
    Update push(const EegBlock& block);

    const std::optional<WorkloadIndex>& latest() const { return smoother_.latest(); }

private:
    StreamClassifier classifier_;
    IndexSmoother smoother_;
};

}  // namespace bcih
