#include "kmtdep/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace kmtdep {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        if (u == 0.0) return -std::numeric_limits<double>::infinity();
        if (u == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("normal_quantile: probability outside [0, 1]");
    }
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, u);
}

double normal_abs_moment(double r) {
    return std::pow(2.0, r / 2.0) * std::tgamma((r + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

namespace {

double pairwise_impl(const double* x, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_impl(x, half) + pairwise_impl(x + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) { return pairwise_impl(xs.data(), xs.size()); }

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
    return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

double sample_sd(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double sample_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("sample_correlation: size mismatch");
    double mx = mean(xs), my = mean(ys);
    std::vector<double> cxy(xs.size()), cxx(xs.size()), cyy(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        cxy[i] = dx * dy;
        cxx[i] = dx * dx;
        cyy[i] = dy * dy;
    }
    double den = std::sqrt(pairwise_sum(cxx) * pairwise_sum(cyy));
    return den > 0.0 ? pairwise_sum(cxy) / den : 0.0;
}

double quantile(std::vector<double> xs, double prob) {
    if (xs.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(xs.begin(), xs.end());
    double pos = prob * static_cast<double>(xs.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, xs.size() - 1);
    double w = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - w) + xs[hi] * w;
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

// Shewchuk / Python math.fsum.
void ExactSum::add(double x) {
    std::size_t used = 0;
    for (double y : partials_) {
        if (std::abs(x) < std::abs(y)) std::swap(x, y);
        double hi = x + y;
        double lo = y - (hi - x);
        if (lo != 0.0) partials_[used++] = lo;
        x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
}

void ExactSum::add(const ExactSum& other) {
    for (double p : other.partials_) add(p);
}

double ExactSum::value() const {
    if (partials_.empty()) return 0.0;
    auto n = partials_.size();
    double hi = partials_[n - 1];
    double lo = 0.0;
    std::size_t i = n - 1;
    while (i > 0) {
        double x = hi;
        double y = partials_[--i];
        hi = x + y;
        double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    // Round-half-even correction, as in fsum.
    if (i > 0 && ((lo < 0.0 && partials_[i - 1] < 0.0) || (lo > 0.0 && partials_[i - 1] > 0.0))) {
        double y = lo * 2.0;
        double x = hi + y;
        double yr = x - hi;
        if (y == yr) hi = x;
    }
    return hi;
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    return ks_statistic_discrete(std::move(sample), cdf, cdf);
}

double ks_statistic_discrete(std::vector<double> sample,
                             const std::function<double(double)>& cdf,
                             const std::function<double(double)>& cdf_left) {
    if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < sample.size()) {
        std::size_t j = i;
        while (j < sample.size() && sample[j] == sample[i]) ++j;
        double x = sample[i];
        double below = static_cast<double>(i) / n;  // empirical P(X < x)
        double upto = static_cast<double>(j) / n;   // empirical P(X <= x)
        d = std::max({d, std::abs(upto - cdf(x)), std::abs(below - cdf_left(x))});
        i = j;
    }
    return d;
}

double ks_critical_value(std::size_t n, double alpha) {
    // Kolmogorov limit c(alpha) = sqrt(-log(alpha / 2) / 2).
    double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    double rn = std::sqrt(static_cast<double>(n));
    return c / (rn + 0.12 + 0.11 / rn);
}

LinearFit least_squares(std::span<const double> y, const std::vector<std::vector<double>>& columns) {
    const std::size_t n = y.size();
    const std::size_t k = columns.size() + 1;
    if (n < k) throw std::invalid_argument("least_squares: fewer observations than parameters");
    for (const auto& c : columns)
        if (c.size() != n) throw std::invalid_argument("least_squares: column length mismatch");
    auto regressor = [&](std::size_t col, std::size_t row) { return col == 0 ? 1.0 : columns[col - 1][row]; };
    // Normal equations via modified Gram-Schmidt QR for stability.
    std::vector<std::vector<double>> q(k, std::vector<double>(n));
    std::vector<std::vector<double>> r(k, std::vector<double>(k, 0.0));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) q[c][i] = regressor(c, i);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += q[prev][i] * q[c][i];
            r[prev][c] = dot;
            for (std::size_t i = 0; i < n; ++i) q[c][i] -= dot * q[prev][i];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q[c][i] * q[c][i];
        norm = std::sqrt(norm);
        if (norm == 0.0) throw std::invalid_argument("least_squares: singular design");
        r[c][c] = norm;
        for (std::size_t i = 0; i < n; ++i) q[c][i] /= norm;
    }
    std::vector<double> qty(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) qty[c] += q[c][i] * y[i];
    LinearFit fit;
    fit.coef.assign(k, 0.0);
    for (std::size_t c = k; c-- > 0;) {
        double s = qty[c];
        for (std::size_t d = c + 1; d < k; ++d) s -= r[c][d] * fit.coef[d];
        fit.coef[c] = s / r[c][c];
    }
    double ybar = mean(y);
    double tss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (std::size_t c = 0; c < k; ++c) pred += fit.coef[c] * regressor(c, i);
        fit.rss += (y[i] - pred) * (y[i] - pred);
        tss += (y[i] - ybar) * (y[i] - ybar);
    }
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
    fit.n = n;
    return fit;
}

double batch_means_se(std::span<const double> batch_values) {
    if (batch_values.size() < 2) return 0.0;
    return sample_sd(batch_values) / std::sqrt(static_cast<double>(batch_values.size()));
}

}  // namespace kmtdep
