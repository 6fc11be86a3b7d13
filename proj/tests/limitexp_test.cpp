#include "peridrift/limitexp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "peridrift/catalog.hpp"
#include "peridrift/stats.hpp"
#include "test_support.hpp"

using namespace peridrift;

TEST(CovarianceMatrix, FrozenExamples) {
    {
        const auto cov = covariance_matrix(HSet({-3.0}));
        ASSERT_EQ(cov.size(), 1u);
        EXPECT_DOUBLE_EQ(cov[0], 3.0);
    }
    {
        const auto cov = covariance_matrix(HSet({-1.0, 2.0}));
        EXPECT_DOUBLE_EQ(cov[0], 1.0);
        EXPECT_DOUBLE_EQ(cov[1], 0.0);
        EXPECT_DOUBLE_EQ(cov[2], 0.0);
        EXPECT_DOUBLE_EQ(cov[3], 2.0);
    }
    {
        const auto cov = covariance_matrix(HSet({1.0, 2.0, 3.0}));
        const double expect[9] = {1, 1, 1, 1, 2, 2, 1, 2, 3};
        for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(cov[i], expect[i]);
    }
}

namespace {

// Cholesky with tiny diagonal jitter; returns false when a pivot fails.
bool cholesky_psd(std::vector<double> a, std::size_t r) {
    for (std::size_t i = 0; i < r; ++i) a[i * r + i] += 1e-12;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * r + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * r + k] * a[j * r + k];
            if (i == j) {
                if (sum <= 0.0) return false;
                a[i * r + i] = std::sqrt(sum);
            } else {
                a[i * r + j] = sum / a[j * r + j];
            }
        }
    }
    return true;
}

}  // namespace

TEST(CovarianceMatrix, PositiveSemidefiniteOnRandomSets) {
    NormalStream rng(11, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const int r = 1 + static_cast<int>(6.0 * rng.next_uniform() * 0.999);
        std::vector<double> vals;
        for (int i = 0; i < r; ++i) {
            double v;
            do {
                v = -5.0 + 10.0 * rng.next_uniform();
            } while (std::find(vals.begin(), vals.end(), v) != vals.end());
            vals.push_back(v);
        }
        const HSet hset(vals);
        EXPECT_TRUE(cholesky_psd(covariance_matrix(hset), hset.size()));
    }
}

TEST(LimitSampler, ZeroParameterGivesUnitLikelihood) {
    const HSet hset({-1.0, 0.0, 2.0});
    const auto sample = sample_limit_field(hset, 1.0, 99, 0);
    EXPECT_EQ(sample.w_values[1], 0.0);
    EXPECT_EQ(sample.loglik[1], 0.0);
}

TEST(LimitSampler, Deterministic) {
    const HSet hset({-2.0, -1.0, 1.0});
    const auto a = sample_limit_field(hset, 0.7, 5, 3);
    const auto b = sample_limit_field(hset, 0.7, 5, 3);
    for (std::size_t i = 0; i < hset.size(); ++i) EXPECT_EQ(a.w_values[i], b.w_values[i]);
}

// Marginals: loglik(h) ~ N(-|h|J/2, |h|J); E[exp loglik] = 1.
TEST(LimitSampler, MomentsAndMeanOne) {
    const int draws = 100000;
    struct Case {
        double h, j;
    };
    for (const Case c : {Case{1.0, 1.0}, Case{-1.0, 1.0}, Case{2.0, 0.5}}) {
        const HSet hset({c.h});
        NormalStream rng(123, static_cast<std::uint64_t>(c.h * 16 + c.j));
        std::vector<double> loglik(draws), lik(draws);
        for (int d = 0; d < draws; ++d) {
            const auto s = sample_limit_field(hset, c.j, rng);
            loglik[d] = s.loglik[0];
            lik[d] = std::exp(s.loglik[0]);
        }
        const double v = std::abs(c.h) * c.j;
        EXPECT_LT(std::abs(stats::mean(loglik) + 0.5 * v), 3.0 * stats::mean_stderr(loglik));
        EXPECT_NEAR(stats::variance(loglik), v, 0.03 * v);
        EXPECT_LT(std::abs(stats::mean(lik) - 1.0), 3.0 * stats::mean_stderr(lik));
    }
}

// Joint structure across the origin: independent halves.
TEST(LimitSampler, CrossSignIndependence) {
    const HSet hset({-1.0, 1.0});
    NormalStream rng(321, 0);
    const int draws = 100000;
    std::vector<double> wm(draws), wp(draws);
    for (int d = 0; d < draws; ++d) {
        const auto s = sample_limit_field(hset, 1.0, rng);
        wm[d] = s.w_values[0];
        wp[d] = s.w_values[1];
    }
    double cov = 0.0;
    const double mm = stats::mean(wm), mp = stats::mean(wp);
    for (int d = 0; d < draws; ++d) cov += (wm[d] - mm) * (wp[d] - mp);
    cov /= draws - 1;
    EXPECT_LT(std::abs(cov), 3.0 / std::sqrt(static_cast<double>(draws)) * 1.1);
}

namespace {

Path jump_refined_path(const ModelSpec& model, const PiecewiseSignal& sig, double theta,
                       double horizon, std::vector<double> h_values, double n,
                       std::uint64_t seed, std::uint64_t stream = 0) {
    SimConfig cfg;
    cfg.horizon = horizon;
    cfg.dt_base = 1e-3;
    cfg.seed = seed;
    cfg.stream = stream;
    cfg.refine_points = local_refine_points(sig, theta, h_values, n, horizon);
    return simulate(model, SignalSpec(sig), theta, cfg);
}

}  // namespace

TEST(CrossProduct, OppositeSignsExactZeroAndZeroParameter) {
    const ModelSpec model = make_ou_sin_sigma_model();
    PiecewiseSignal sig;
    sig.jump_times = {0.5};
    sig.jump_heights = {1.0};
    sig.continuous_part = [](double) { return 0.0; };
    const double theta = 1.0, n = 50.0;
    const Path path = jump_refined_path(model, sig, theta, n, {-1.0, 1.0}, n, 41);
    EXPECT_EQ(cross_product_check(path, model, sig, theta, n, -1.0, 1.0, 1.0), 0.0);
    EXPECT_EQ(cross_product_check(path, model, sig, theta, n, 1.0, -1.0, 1.0), 0.0);
    EXPECT_EQ(cross_product_check(path, model, sig, theta, n, 0.0, -1.0, 1.0), 0.0);
}

// sigma = 1, theta = 1, single jump rho = 1, h1 = h2 = -1, t = 1:
// the integral is exactly |h| sum_k (k + r)/n^2 over the intervals inside
// [0, n], close to t^2/2 = |h| t^2 J.
TEST(CrossProduct, ConstantSigmaClosedForm) {
    const ModelSpec model = make_ou_model();
    PiecewiseSignal sig;
    sig.jump_times = {0.5};
    sig.jump_heights = {1.0};
    sig.continuous_part = [](double) { return 0.0; };
    const double theta = 1.0, n = 200.0;
    const Path path = jump_refined_path(model, sig, theta, n, {-1.0}, n, 43);
    const double value = cross_product_check(path, model, sig, theta, n, -1.0, -1.0, 1.0);
    double expected = 0.0;
    for (long long k = 0;; ++k) {
        const double kr = static_cast<double>(k) + 0.5;
        if ((1.0 - 1.0 / (n * n)) * kr > n) break;
        expected += (theta * kr - (theta - 1.0 / (n * n)) * kr);
    }
    EXPECT_NEAR(value, expected, 1e-9);
    EXPECT_NEAR(value, 0.5, 0.05);  // |h| t^2 J with J = 1/2
}

TEST(CrossProduct, RegimeErrorBelowThreshold) {
    const ModelSpec model = make_ou_model();
    PiecewiseSignal sig;
    sig.jump_times = {0.5};
    sig.jump_heights = {1.0};
    sig.continuous_part = [](double) { return 0.0; };
    const double theta = 1.0, n = 10.0;
    const Path path = jump_refined_path(model, sig, theta, n, {-8.0}, n, 47);
    EXPECT_THROW(cross_product_check(path, model, sig, theta, n, -8.0, -8.0, 1.0),
                 RegimeError);
}

// Same-sign product equals (j^{h~})^2 with the smaller |h| (via the
// integral): nested intervals, checked for randomized configurations.
TEST(CrossProduct, MatchesSmallerParameterIntegral) {
    NormalStream rng(53, 0);
    const ModelSpec model = make_ou_model();
    for (int trial = 0; trial < 5; ++trial) {
        auto cfg = testsupport::random_jump_config(rng);
        // force matching signs
        cfg.h2 = std::copysign(cfg.h2, cfg.h1);
        const auto sig = testsupport::to_signal(cfg);
        const double n = static_cast<double>(cfg.n);
        std::vector<double> hs = {cfg.h1, cfg.h2};
        const Path path = jump_refined_path(model, sig, cfg.theta, cfg.t0 * n, hs, n, 59,
                                            static_cast<std::uint64_t>(trial));
        const double both =
            cross_product_check(path, model, sig, cfg.theta, n, cfg.h1, cfg.h2, cfg.t0);
        const double h_tilde = (cfg.h1 < 0.0) ? -std::min(std::abs(cfg.h1), std::abs(cfg.h2))
                                              : std::min(cfg.h1, cfg.h2);
        const double single =
            cross_product_check(path, model, sig, cfg.theta, n, h_tilde, h_tilde, cfg.t0);
        EXPECT_NEAR(both, single, 1e-12);
    }
}

TEST(IntervalSum, ConstantSigmaExactIdentity) {
    const ModelSpec model = make_ou_model();
    PiecewiseSignal sig;
    sig.jump_times = {0.4};
    sig.jump_heights = {1.0};
    sig.continuous_part = [](double) { return 0.0; };
    const double theta = 1.0, n = 60.0, h = -1.5, r = 0.4;
    const long long m = 50;
    const Path path = jump_refined_path(model, sig, theta, n, {h}, n, 61);
    const auto pair = interval_sum_check(path, model, theta, r, h, n, m);
    double lhs_expected = 0.0, rhs_expected = 0.0;
    for (long long k = 0; k <= m; ++k) {
        lhs_expected += std::abs(h) * (static_cast<double>(k) + r) / (n * n);
        rhs_expected += std::abs(h) * static_cast<double>(k) / (n * n);
    }
    EXPECT_NEAR(pair.lhs, lhs_expected, 1e-9);
    EXPECT_NEAR(pair.rhs, rhs_expected, 1e-12);
    // difference = |h| r (m+1) / n^2 exactly
    EXPECT_NEAR(pair.lhs - pair.rhs, std::abs(h) * r * (m + 1) / (n * n), 1e-9);

    const auto zero = interval_sum_check(path, model, theta, r, 0.0, n, m);
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_EQ(zero.rhs, 0.0);
}

// Median |lhs - rhs| decreases when n doubles (nonconstant sigma).
TEST(IntervalSum, MedianDiscrepancyShrinks) {
    const ModelSpec model = make_ou_sin_sigma_model();
    PiecewiseSignal sig;
    sig.jump_times = {0.4};
    sig.jump_heights = {1.0};
    sig.continuous_part = [](double) { return 0.0; };
    const double theta = 1.0, h = -1.0, r = 0.4;
    const int reps = 20;
    std::vector<double> med;
    for (double n : {50.0, 200.0}) {
        const long long m = static_cast<long long>(n) - 2;
        std::vector<double> gaps(reps);
        for (int rep = 0; rep < reps; ++rep) {
            const Path path = jump_refined_path(model, sig, theta, n, {h}, n, 67,
                                                static_cast<std::uint64_t>(rep));
            const auto pair = interval_sum_check(path, model, theta, r, h, n, m);
            gaps[rep] = std::abs(pair.lhs - pair.rhs);
        }
        med.push_back(stats::median(gaps));
    }
    EXPECT_LT(med[1], med[0]);
}

// Small smoke of the finite-dimensional check: J_hat close to the exact
// J = 1 for the box with unit sigma, means near -|h| J/2 at modest n.
TEST(FdConvergence, SmokeBoxUnitSigma) {
    const ModelSpec model = make_ou_model();
    const PiecewiseSignal box = make_box_signal(0.25, 0.75);
    const HSet hset({-1.0, 1.0});
    const auto report =
        fd_convergence_check(model, box, 1.0, {30.0, 60.0}, hset, 60, 71, 2, 0.0, 600.0);
    EXPECT_NEAR(report.j_hat, 1.0, 1e-9);  // exact under sigma = 1
    ASSERT_EQ(report.per_n.size(), 2u);
    for (const auto& row : report.per_n) {
        for (std::size_t hi = 0; hi < hset.size(); ++hi)
            EXPECT_NEAR(row.mean_loglik[hi], -0.5 * report.j_hat, 6.0 * row.mean_se[hi] + 0.05);
        EXPECT_LT(row.max_cross_cov_abs, 5.0 * row.max_cross_cov_se + 0.05);
    }
    EXPECT_EQ(report.aborted, 0);
}

TEST(BayesMle, MarginErrorsUpfront) {
    EXPECT_THROW(mle_vs_bayes(1.0, 15.0, default_bayes_mle_grid(1.0), 100, 5),
                 MarginError);
    EXPECT_THROW(mle_vs_bayes(1.0, 0.0, {-20.0, 20.0, 0.5}, 100, 5), MarginError);
}

// Bayes beats the MLE for squared loss in the limit experiment.
TEST(BayesMle, BayesBeatsMleAtModerateDraws) {
    const auto report = mle_vs_bayes(1.0, 0.0, default_bayes_mle_grid(1.0), 800, 2025);
    EXPECT_GT(report.used, 780);
    EXPECT_LT(report.bayes_mse, report.mle_mse);
}

// Scaling: risks drop like 1/J^2; the ratio stays <= 1 + noise.
TEST(BayesMle, LargeJShrinksRisk) {
    const auto small_j = mle_vs_bayes(1.0, 0.0, default_bayes_mle_grid(1.0), 400, 77);
    const auto large_j = mle_vs_bayes(100.0, 0.0, default_bayes_mle_grid(100.0), 400, 78);
    EXPECT_LT(large_j.mle_mse, small_j.mle_mse);
    EXPECT_LT(large_j.bayes_mse, small_j.bayes_mse);
    const double rel_se = large_j.pooled_se / large_j.mle_mse;
    EXPECT_LE(large_j.mse_ratio, 1.0 + 3.0 * rel_se);
}

// Symmetric setting: estimator distributions centered at the truth.
TEST(BayesMle, SymmetricAboutTruth) {
    const auto report = mle_vs_bayes(1.0, 0.0, default_bayes_mle_grid(1.0), 800, 91);
    const double mle_sd = std::sqrt(report.mle_mse / report.used);
    const double bayes_sd = std::sqrt(report.bayes_mse / report.used);
    EXPECT_LT(std::abs(report.mle_mean), 3.0 * mle_sd);
    EXPECT_LT(std::abs(report.bayes_mean), 3.0 * bayes_sd);
}
