#pragma once

#include <array>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace bcih {

inline constexpr double kLogVarianceEpsilon = 1e-12;

struct CovarianceEstimate {
    Eigen::MatrixXd matrix;
    std::size_t n_windows = 0;
    double shrinkage = 0.0;
};

/// Mean of per-window sample covariances (channels x samples windows),
/// shrunk toward (trace/d) * I.
CovarianceEstimate estimate_covariance(std::span<const Eigen::MatrixXd> windows, double shrinkage);

/// Same, for windows given as start columns into one long stream.
CovarianceEstimate estimate_covariance(const Eigen::MatrixXd& stream, std::span<const Eigen::Index> starts,
                                       Eigen::Index length, double shrinkage);

/// Spatial filters of one band: rows of `filters` are w with
/// w'(S_high + S_low)w = 1, ordered by descending eigenvalue.
struct CspBand {
    Eigen::MatrixXd filters;      // (2 * n_pairs) x channels
    Eigen::VectorXd eigenvalues;  // descending, in (0, 1)
};

/// Solves S_high w = lambda (S_high + S_low) w and keeps n_pairs filters
/// from each end of the spectrum. Throws NumericalError when either
/// covariance is not positive definite.
CspBand train_csp(const CovarianceEstimate& cov_low, const CovarianceEstimate& cov_high, int n_pairs = 3);

/// log(var(w' X) + eps), sample variance over the window's columns.
double csp_feature(const Eigen::MatrixXd& window, const Eigen::RowVectorXd& filter);

/// All filters of one band at once.
Eigen::VectorXd csp_features(const Eigen::Ref<const Eigen::MatrixXd>& window, const Eigen::MatrixXd& filters);

/// Plug-in mutual information in bits from the joint histogram.
double mutual_information(std::span<const int> a, std::span<const int> b);

/// Equal-frequency discretisation into `n_bins` bins; equal values share a bin.
std::vector<int> discretize_equal_frequency(std::span<const double> values, int n_bins = 8);

struct FeatureCouple {
    int band = 0;
    int filter = 0;

    static constexpr int kFiltersPerBand = 6;
    int id() const { return band * kFiltersPerBand + filter; }
    static FeatureCouple from_id(int id) { return {id / kFiltersPerBand, id % kFiltersPerBand}; }
    bool operator==(const FeatureCouple&) const = default;
};

/// Greedy MID-form mRMR on already-discretised columns. Returns column
/// indices in selection order; ties go to the lowest index.
std::vector<int> mrmr_select_discrete(const std::vector<std::vector<int>>& columns, std::span<const int> labels,
                                      int k);

/// Discretises each column of the n x F table into 8 equal-frequency bins,
/// then runs mrmr_select_discrete.
std::vector<FeatureCouple> mrmr_select(const Eigen::MatrixXd& table, std::span<const int> labels, int k = 6);

struct LdaModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double gamma = 0.1;

    double discriminant(const Eigen::Ref<const Eigen::VectorXd>& x) const { return weights.dot(x) + bias; }
    /// +1 (high workload) or -1; a zero discriminant maps to +1.
    int classify(const Eigen::Ref<const Eigen::VectorXd>& x) const { return discriminant(x) >= 0.0 ? 1 : -1; }
};

/// Shrinkage LDA on rows of `features`; labels are +1 (high) / -1 (low).
LdaModel train_lda(const Eigen::MatrixXd& features, std::span<const int> labels, double gamma = 0.1);

inline constexpr int kIndexHistory = 10;

/// Smoothed workload index: median of the last ten raw labels.
struct WorkloadIndex {
    double time = 0.0;
    int value = 0;
    std::array<int, kIndexHistory> raw_history{};
};

/// Median of the values; for an even count the mean of the two middle ones.
double median_of(std::span<const int> values);

/// Keeps the last ten raw labels and emits an index on every tenth label.
class IndexSmoother {
public:
    std::optional<WorkloadIndex> push(int label, double time = 0.0);

    std::size_t labels_seen() const { return seen_; }
    const std::optional<WorkloadIndex>& latest() const { return latest_; }
    void reset();

private:
    std::deque<int> history_;
    std::size_t seen_ = 0;
    std::optional<WorkloadIndex> latest_;
};

/// Batch form: indices for a raw label sequence (one per ten labels).
std::vector<WorkloadIndex> smooth_index(std::span<const int> labels, std::span<const double> times = {});

}  // namespace bcih
