#include "bcih/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "bcih/errors.hpp"

namespace bcih {

json to_json(const StatResult& r) {
    json j{{"test", r.test}, {"statistic", r.statistic}, {"p_value", r.p_value},
           {"threshold", r.threshold}, {"n", r.n}, {"significant", r.significant()}};
    if (r.df > 0) j["df"] = r.df;
    if (r.test == "wilcoxon") j["exact"] = r.exact;
    return j;
}

namespace {

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) throw InputError("gamma_q requires a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
    return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chi2_sf(double x, int df) {
    if (df < 1) throw InputError("chi-square needs df >= 1");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * df, 0.5 * x);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Eigen::VectorXd average_ranks(std::span<const double> values) {
    const auto n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    Eigen::VectorXd ranks(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[static_cast<Eigen::Index>(order[m])] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
    std::map<double, int> counts;
    for (double v : values) ++counts[v];
    double s = 0.0;
    for (const auto& [v, t] : counts) s += static_cast<double>(t) * t * t - t;
    return s;
}

}  // namespace

StatResult friedman_test(const Eigen::MatrixXd& values) {
    const auto n = values.rows(), k = values.cols();
    if (n < 2 || k < 2) throw InputError("friedman_test needs at least 2 subjects and 2 conditions");
    if (!values.allFinite()) throw InputError("friedman_test: non-finite value");
    Eigen::VectorXd rank_sums = Eigen::VectorXd::Zero(k);
    double ties = 0.0;
    std::vector<double> row(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = values(i, j);
        rank_sums += average_ranks(row);
        ties += tie_term(row);
    }
    StatResult r;
    r.test = "friedman";
    r.n = static_cast<int>(n);
    r.df = static_cast<int>(k - 1);
    const double dn = static_cast<double>(n), dk = static_cast<double>(k);
    const double correction = 1.0 - ties / (dn * dk * (dk * dk - 1.0));
    if (correction <= 1e-12) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    const double chi2 = 12.0 / (dn * dk * (dk + 1.0)) * rank_sums.squaredNorm() - 3.0 * dn * (dk + 1.0);
    r.statistic = std::max(0.0, chi2 / correction);
    r.p_value = chi2_sf(r.statistic, r.df);
    return r;
}

StatResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative) {
    if (a.size() != b.size()) throw InputError("wilcoxon_signed_rank: samples differ in length");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d)) throw InputError("wilcoxon_signed_rank: non-finite value");
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw DegenerateDataError("wilcoxon_signed_rank: all differences are zero");
    const auto n = diffs.size();
    if (n < 5) throw InputError("wilcoxon_signed_rank needs at least 5 nonzero differences");

    std::vector<double> mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(diffs[i]);
    const Eigen::VectorXd ranks = average_ranks(mags);
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (diffs[i] > 0.0) w += ranks[static_cast<Eigen::Index>(i)];

    StatResult r;
    r.test = "wilcoxon";
    r.n = static_cast<int>(n);
    r.statistic = w;
    double p_lower, p_upper;  // P(W <= w), P(W >= w) under H0
    if (n <= 12) {
        // Doubled ranks are integers even with average-rank ties.
        std::vector<int> doubled(n);
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = static_cast<int>(std::lround(2.0 * ranks[static_cast<Eigen::Index>(i)]));
            total += doubled[i];
        }
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        for (int d : doubled)
            for (int s = total; s >= d; --s) counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - d)];
        const int w2 = static_cast<int>(std::lround(2.0 * w));
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double lo = 0.0, hi = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= w2) lo += counts[static_cast<std::size_t>(s)];
            if (s >= w2) hi += counts[static_cast<std::size_t>(s)];
        }
        p_lower = lo / all;
        p_upper = hi / all;
        r.exact = true;
    } else {
        const double dn = static_cast<double>(n);
        const double mean = dn * (dn + 1.0) / 4.0;
        const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term(mags) / 48.0;
        const double sd = std::sqrt(var);
        p_lower = normal_cdf((w - mean + 0.5) / sd);
        p_upper = 1.0 - normal_cdf((w - mean - 0.5) / sd);
    }
    switch (alternative) {
        case Alternative::Less: r.p_value = p_lower; break;
        case Alternative::Greater: r.p_value = p_upper; break;
        case Alternative::TwoSided: r.p_value = std::min(1.0, 2.0 * std::min(p_lower, p_upper)); break;
    }
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
    return r;
}

}  // namespace bcih
