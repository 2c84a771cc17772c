#pragma once

#include <span>
#include <string>

#include <Eigen/Core>

#include "bcih/json_util.hpp"

namespace bcih {

struct StatResult {
    std::string test;
    double statistic = 0.0;  // chi^2 (Friedman) or W (Wilcoxon)
    double p_value = 1.0;
    double threshold = 0.05;
    int n = 0;
    int df = 0;              // Friedman only
    bool exact = false;      // Wilcoxon: exact enumeration used

    bool significant() const { return p_value < threshold; }
};

json to_json(const StatResult& r);

/// Regularized upper incomplete gamma Q(a, x) (series below a+1, Lentz
/// continued fraction above).
double gamma_q(double a, double x);
/// Upper tail of the chi-square distribution.
double chi2_sf(double x, int df);
/// Standard normal CDF.
double normal_cdf(double z);

/// Ranks 1..n with ties given their average rank.
Eigen::VectorXd average_ranks(std::span<const double> values);

/// Friedman test over rows = subjects, columns = conditions, with the usual
/// tie correction. When every row is constant (identical columns) there is
/// no evidence of an effect and the result is chi^2 = 0, p = 1. Throws
/// InputError for n < 2, k < 2 or non-finite values.
StatResult friedman_test(const Eigen::MatrixXd& values);

enum class Alternative { TwoSided, Less, Greater };

/// Wilcoxon signed-rank test on d = a - b. Zero differences are dropped,
/// tied magnitudes get average ranks. W is the sum of positive ranks. The
/// p-value is exact for n <= 12 (enumeration over sign patterns) and
/// otherwise a normal approximation with continuity and tie correction.
/// `Less` tests whether a tends to be below b. Throws DegenerateDataError
/// when every difference is zero and InputError for fewer than 5 nonzero
/// differences or mismatched lengths.
StatResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                Alternative alternative = Alternative::TwoSided);

}  // namespace bcih
