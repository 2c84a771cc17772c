#include "bcih/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

Eigen::MatrixXd window_covariance(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    const Eigen::Index n = x.cols();
    if (n < 2) throw InputError("covariance windows need at least two samples");
    const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
    return (centered * centered.transpose()) / static_cast<double>(n - 1);
}

CovarianceEstimate finish(Eigen::MatrixXd sum, std::size_t count, double shrinkage) {
    Eigen::MatrixXd mean = sum / static_cast<double>(count);
    mean = 0.5 * (mean + mean.transpose());
    const double d = static_cast<double>(mean.rows());
    const double scale = mean.trace() / d;
    if (shrinkage == 1.0) {
        mean = scale * Eigen::MatrixXd::Identity(mean.rows(), mean.cols());
    } else if (shrinkage > 0.0) {
        mean = (1.0 - shrinkage) * mean;
        mean.diagonal().array() += shrinkage * scale;
    }
    return {std::move(mean), count, shrinkage};
}

void check_shrinkage(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw InputError("shrinkage must lie in [0, 1]");
}

void check_positive_definite(const Eigen::MatrixXd& m, const char* name) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success || !m.allFinite()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        throw NumericalError(std::string("CSP: ") + name + " covariance is not positive definite (min eigenvalue " +
                             std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
}

// Compact, order-preserving relabelling to 0..m-1.
std::vector<int> compact(std::span<const int> v, int& n_levels) {
    std::map<int, int> ids;
    for (int x : v) ids.emplace(x, 0);
    int next = 0;
    for (auto& [key, id] : ids) id = next++;
    n_levels = next;
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = ids[v[i]];
    return out;
}

}  // namespace

CovarianceEstimate estimate_covariance(std::span<const Eigen::MatrixXd> windows, double shrinkage) {
    check_shrinkage(shrinkage);
    if (windows.empty()) throw InputError("estimate_covariance: empty window list");
    const Eigen::Index d = windows.front().rows();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
    for (const auto& w : windows) {
        if (w.rows() != d) throw InputError("estimate_covariance: inconsistent channel counts");
        sum += window_covariance(w);
    }
    return finish(std::move(sum), windows.size(), shrinkage);
}

CovarianceEstimate estimate_covariance(const Eigen::MatrixXd& stream, std::span<const Eigen::Index> starts,
                                       Eigen::Index length, double shrinkage) {
    check_shrinkage(shrinkage);
    if (starts.empty()) throw InputError("estimate_covariance: empty window list");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(stream.rows(), stream.rows());
    for (Eigen::Index s : starts) {
        if (s < 0 || s + length > stream.cols()) throw InputError("estimate_covariance: window out of range");
        sum += window_covariance(stream.middleCols(s, length));
    }
    return finish(std::move(sum), starts.size(), shrinkage);
}

CspBand train_csp(const CovarianceEstimate& cov_low, const CovarianceEstimate& cov_high, int n_pairs) {
    const auto& low = cov_low.matrix;
    const auto& high = cov_high.matrix;
    if (low.rows() != high.rows() || low.rows() != low.cols() || high.rows() != high.cols())
        throw InputError("CSP: covariance dimensions differ");
    const Eigen::Index d = low.rows();
    if (n_pairs < 1 || 2 * n_pairs > d) throw InputError("CSP: n_pairs must be in [1, channels/2]");
    check_positive_definite(low, "low-class");
    check_positive_definite(high, "high-class");

    const Eigen::MatrixXd composite = low + high;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(high, composite);
    if (ges.info() != Eigen::Success) throw NumericalError("CSP: generalized eigensolver failed");
    // Eigen returns ascending eigenvalues with v'Bv = 1.
    const Eigen::VectorXd& ev = ges.eigenvalues();
    const Eigen::MatrixXd& vecs = ges.eigenvectors();

    std::vector<Eigen::Index> keep;
    for (int i = 0; i < n_pairs; ++i) keep.push_back(d - 1 - i);
    for (int i = n_pairs - 1; i >= 0; --i) keep.push_back(i);

    CspBand band;
    band.filters.resize(2 * n_pairs, d);
    band.eigenvalues.resize(2 * n_pairs);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        Eigen::VectorXd w = vecs.col(keep[r]);
        Eigen::Index arg = 0;
        w.cwiseAbs().maxCoeff(&arg);
        if (w(arg) < 0.0) w = -w;  // deterministic sign
        band.filters.row(static_cast<Eigen::Index>(r)) = w.transpose();
        band.eigenvalues(static_cast<Eigen::Index>(r)) = ev(keep[r]);
    }
    return band;
}

double csp_feature(const Eigen::MatrixXd& window, const Eigen::RowVectorXd& filter) {
    if (filter.size() != window.rows()) throw InputError("csp_feature: dimension mismatch");
    const Eigen::RowVectorXd y = filter * window;
    const Eigen::Index n = y.size();
    if (n < 2) return std::log(kLogVarianceEpsilon);
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / static_cast<double>(n - 1);
    return std::log(var + kLogVarianceEpsilon);
}

Eigen::VectorXd csp_features(const Eigen::Ref<const Eigen::MatrixXd>& window, const Eigen::MatrixXd& filters) {
    const Eigen::MatrixXd y = filters * window;
    const Eigen::Index n = y.cols();
    const Eigen::VectorXd mean = y.rowwise().mean();
    const Eigen::VectorXd var =
        (y.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    return (var.array() + kLogVarianceEpsilon).log();
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw InputError("mutual_information: length mismatch");
    if (a.size() < 2) throw InputError("mutual_information: need at least two samples");
    int na = 0, nb = 0;
    const auto ca = compact(a, na);
    const auto cb = compact(b, nb);
    std::vector<double> joint(static_cast<std::size_t>(na * nb), 0.0);
    std::vector<double> pa(static_cast<std::size_t>(na), 0.0), pb(static_cast<std::size_t>(nb), 0.0);
    for (std::size_t i = 0; i < ca.size(); ++i) {
        joint[static_cast<std::size_t>(ca[i] * nb + cb[i])] += 1.0;
        pa[static_cast<std::size_t>(ca[i])] += 1.0;
        pb[static_cast<std::size_t>(cb[i])] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double mi = 0.0;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            const double c = joint[static_cast<std::size_t>(i * nb + j)];
            if (c == 0.0) continue;
            mi += (c / n) * std::log2(c * n / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
        }
    }
    return std::max(0.0, mi);
}

std::vector<int> discretize_equal_frequency(std::span<const double> values, int n_bins) {
    if (n_bins < 1) throw InputError("discretize: n_bins must be >= 1");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::vector<double> edges;
    for (int j = 1; j < n_bins; ++j) {
        const std::size_t pos = (static_cast<std::size_t>(j) * n) / static_cast<std::size_t>(n_bins);
        if (pos < n) edges.push_back(sorted[pos]);
    }
    std::vector<int> bins(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        bins[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
    return bins;
}

std::vector<int> mrmr_select_discrete(const std::vector<std::vector<int>>& columns, std::span<const int> labels,
                                      int k) {
    const int f = static_cast<int>(columns.size());
    if (k < 1 || k > f) throw InputError("mrmr_select: k must be in [1, feature count]");
    std::vector<double> relevance(static_cast<std::size_t>(f));
    for (int i = 0; i < f; ++i) relevance[static_cast<std::size_t>(i)] = mutual_information(columns[static_cast<std::size_t>(i)], labels);

    std::vector<int> selected;
    std::vector<bool> taken(static_cast<std::size_t>(f), false);
    std::vector<double> redundancy_sum(static_cast<std::size_t>(f), 0.0);
    while (static_cast<int>(selected.size()) < k) {
        int best = -1;
        double best_score = 0.0;
        for (int i = 0; i < f; ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            double score = relevance[static_cast<std::size_t>(i)];
            if (!selected.empty())
                score -= redundancy_sum[static_cast<std::size_t>(i)] / static_cast<double>(selected.size());
            // Scores equal up to rounding are ties; the lower index wins.
            if (best < 0 || score > best_score + 1e-12) {
                best = i;
                best_score = score;
            }
        }
        selected.push_back(best);
        taken[static_cast<std::size_t>(best)] = true;
        for (int i = 0; i < f; ++i)
            if (!taken[static_cast<std::size_t>(i)])
                redundancy_sum[static_cast<std::size_t>(i)] +=
                    mutual_information(columns[static_cast<std::size_t>(i)], columns[static_cast<std::size_t>(best)]);
    }
    return selected;
}

std::vector<FeatureCouple> mrmr_select(const Eigen::MatrixXd& table, std::span<const int> labels, int k) {
    if (!table.allFinite()) throw InputError("mrmr_select: feature table has non-finite values");
    if (static_cast<std::size_t>(table.rows()) != labels.size())
        throw InputError("mrmr_select: label count does not match table rows");
    if (k > table.cols()) throw InputError("mrmr_select: k exceeds feature count");
    std::vector<std::vector<int>> columns;
    columns.reserve(static_cast<std::size_t>(table.cols()));
    std::vector<double> col(static_cast<std::size_t>(table.rows()));
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
        for (Eigen::Index r = 0; r < table.rows(); ++r) col[static_cast<std::size_t>(r)] = table(r, c);
        columns.push_back(discretize_equal_frequency(col, 8));
    }
    std::vector<FeatureCouple> out;
    for (int id : mrmr_select_discrete(columns, labels, k)) out.push_back(FeatureCouple::from_id(id));
    return out;
}

LdaModel train_lda(const Eigen::MatrixXd& features, std::span<const int> labels, double gamma) {
    const Eigen::Index n = features.rows();
    const Eigen::Index m = features.cols();
    if (static_cast<std::size_t>(n) != labels.size()) throw InputError("train_lda: label count mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InputError("train_lda: gamma must lie in [0, 1]");
    Eigen::VectorXd mu_hi = Eigen::VectorXd::Zero(m), mu_lo = Eigen::VectorXd::Zero(m);
    Eigen::Index n_hi = 0, n_lo = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y == 1) {
            mu_hi += features.row(i).transpose();
            ++n_hi;
        } else if (y == -1) {
            mu_lo += features.row(i).transpose();
            ++n_lo;
        } else {
            throw InputError("train_lda: labels must be +1 or -1");
        }
    }
    if (n_hi == 0 || n_lo == 0) throw TrainingError("train_lda: both classes must be present");
    if (n < 12) throw TrainingError("train_lda: at least 12 training rows are required");
    mu_hi /= static_cast<double>(n_hi);
    mu_lo /= static_cast<double>(n_lo);

    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd d = features.row(i).transpose() - (labels[static_cast<std::size_t>(i)] == 1 ? mu_hi : mu_lo);
        scatter.noalias() += d * d.transpose();
    }
    Eigen::MatrixXd pooled = scatter / static_cast<double>(n - 2);
    const double scale = pooled.trace() / static_cast<double>(m);
    pooled = (1.0 - gamma) * pooled;
    pooled.diagonal().array() += gamma * scale;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(pooled);
    if (ldlt.info() != Eigen::Success) throw TrainingError("train_lda: pooled covariance is singular");
    LdaModel model;
    model.gamma = gamma;
    model.weights = ldlt.solve(mu_hi - mu_lo);
    if (!model.weights.allFinite()) throw TrainingError("train_lda: non-finite weights");
    model.bias = -model.weights.dot(0.5 * (mu_hi + mu_lo));
    return model;
}

double median_of(std::span<const int> values) {
    if (values.empty()) throw InputError("median of an empty set");
    std::vector<int> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

std::optional<WorkloadIndex> IndexSmoother::push(int label, double time) {
    history_.push_back(label);
    if (history_.size() > kIndexHistory) history_.pop_front();
    ++seen_;
    if (seen_ < kIndexHistory || seen_ % kIndexHistory != 0) return std::nullopt;
    WorkloadIndex idx;
    idx.time = time;
    std::copy(history_.begin(), history_.end(), idx.raw_history.begin());
    idx.value = static_cast<int>(median_of(idx.raw_history));
    latest_ = idx;
    return idx;
}

void IndexSmoother::reset() {
    history_.clear();
    seen_ = 0;
    latest_.reset();
}

std::vector<WorkloadIndex> smooth_index(std::span<const int> labels, std::span<const double> times) {
    if (!times.empty() && times.size() != labels.size()) throw InputError("smooth_index: times length mismatch");
    IndexSmoother s;
    std::vector<WorkloadIndex> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (auto idx = s.push(labels[i], times.empty() ? 0.1 * static_cast<double>(i + 1) : times[i]))
            out.push_back(*idx);
    return out;
}

}  // namespace bcih
