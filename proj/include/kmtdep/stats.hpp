#pragma once

// Small numerical helpers shared across modules: normal distribution
// functions, order-insensitive reductions, exact summation, KS statistics,
// and least squares.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace kmtdep {

double normal_cdf(double x);
double normal_pdf(double x);
/// Standard normal quantile, full double precision on (0, 1).
double normal_quantile(double u);

/// E|Z|^r for Z ~ N(0, 1).
double normal_abs_moment(double r);

/// Pairwise (cascade) summation. Result depends only on the order of the
/// input, never on how the work producing it was scheduled.
double pairwise_sum(std::span<const double> xs);
double mean(std::span<const double> xs);
/// Unbiased sample variance.
double variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);
double sample_correlation(std::span<const double> xs, std::span<const double> ys);
/// Linear-interpolated quantile of an unsorted sample, prob in [0, 1].
double quantile(std::vector<double> xs, double prob);
double median(std::vector<double> xs);

/// Exactly rounded floating-point summation (Shewchuk partials). The rounded
/// result equals round(sum of the real inputs), so two accumulators fed the
/// same multiset of values, in any order or grouping, round identically.
class ExactSum {
  public:
    void add(double x);
    void add(const ExactSum& other);
    double value() const;
    const std::vector<double>& partials() const { return partials_; }

  private:
    std::vector<double> partials_;
};

/// Kolmogorov-Smirnov distance between a sample and a continuous target CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

/// KS statistic against a CDF with atoms: sup over both one-sided limits.
/// `cdf_left(x)` must return P(X < x).
double ks_statistic_discrete(std::vector<double> sample,
                             const std::function<double(double)>& cdf,
                             const std::function<double(double)>& cdf_left);

/// Critical value of the one-sample KS statistic at level alpha (Stephens'
/// finite-n correction of the Kolmogorov limit).
double ks_critical_value(std::size_t n, double alpha = 0.01);

struct LinearFit {
    std::vector<double> coef;  // intercept first
    double rss = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares with intercept. `columns` are the regressors.
LinearFit least_squares(std::span<const double> y, const std::vector<std::vector<double>>& columns);

/// Batch-means standard error of a statistic computed on contiguous batches.
double batch_means_se(std::span<const double> batch_values);

}  // namespace kmtdep
