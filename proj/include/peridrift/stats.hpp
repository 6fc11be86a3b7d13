#pragma once

// Small statistics kit shared by the experiment modules: moments,
// quantiles, Kolmogorov-Smirnov distance, batch-means standard errors,
// least-squares slopes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace peridrift::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Unbiased sample variance (n-1 denominator).
inline double variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance: need >= 2 samples");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

// Standard error of the sample mean.
inline double mean_stderr(std::span<const double> xs) {
    return stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

// Linear-interpolated quantile, p in [0,1]. Sorts a copy.
inline double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = p * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    const double w = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - w) + xs[lo + 1] * w;
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample KS distance against a cdf; cdf must be callable double->double.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf&& cdf) {
    if (xs.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n,
                                 static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double ks_statistic_normal(std::vector<double> xs, double mu = 0.0, double sigma = 1.0) {
    return ks_statistic(std::move(xs),
                        [mu, sigma](double x) { return normal_cdf((x - mu) / sigma); });
}

// Standard error of an average from non-overlapping batch means.
inline double batch_means_stderr(std::span<const double> batch_means) {
    if (batch_means.size() < 2)
        throw std::invalid_argument("batch_means_stderr: need >= 2 batches");
    return stddev(batch_means) / std::sqrt(static_cast<double>(batch_means.size()));
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
inline LineFit ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_fit: need matched samples of size >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate x");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

}  // namespace peridrift::stats
