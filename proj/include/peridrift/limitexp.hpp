#pragma once

// The discontinuous-signal limit experiment: likelihoods
// exp{ W~(h J) - |h| J / 2 } indexed by a double-sided Brownian motion W~.
// Exact finite-dimensional samplers, the covariance matrix of W~ on a
// finite parameter set, empirical finite-dimensional convergence checks of
// the prelimit log-likelihoods, the deterministic cross-product limits of
// the jump functionals, and the MLE-vs-Bayes risk comparison in the limit
// model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "peridrift/ergodic.hpp"
#include "peridrift/errors.hpp"
#include "peridrift/likelihood.hpp"
#include "peridrift/parallel.hpp"
#include "peridrift/rng.hpp"
#include "peridrift/sde.hpp"
#include "peridrift/stats.hpp"

namespace peridrift {

// Finite set of local parameters, kept sorted and distinct.
struct HSet {
    std::vector<double> values;

    explicit HSet(std::vector<double> vals) : values(std::move(vals)) {
        if (values.empty()) throw std::invalid_argument("HSet: empty");
        std::sort(values.begin(), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i)
            if (values[i] == values[i + 1]) throw std::invalid_argument("HSet: duplicate value");
    }

    std::size_t size() const { return values.size(); }
    double max_abs() const {
        double d = 0.0;
        for (double h : values) d = std::max(d, std::abs(h));
        return d;
    }
};

// Covariance of (W~(h_i))_i: |h_i| ^ |h_j| on matching signs, 0 across the
// origin. Row-major r x r.
inline std::vector<double> covariance_matrix(const HSet& hset) {
    const std::size_t r = hset.size();
    std::vector<double> cov(r * r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            const double hi = hset.values[i], hj = hset.values[j];
            const bool same_sign = (hi > 0.0 && hj > 0.0) || (hi < 0.0 && hj < 0.0);
            cov[i * r + j] = same_sign ? std::min(std::abs(hi), std::abs(hj)) : 0.0;
        }
    }
    return cov;
}

struct LimitSample {
    std::vector<double> h_values;
    double j_constant = 0.0;
    std::vector<double> w_values;  // W~(h_i J)
    std::vector<double> loglik;    // W~(h_i J) - |h_i| J / 2
};

// Exact sampling of the limit field on the finite grid: independent
// Gaussian increments cumulated outward on each half-line (negative side
// first, then positive; W~(0) = 0).
inline LimitSample sample_limit_field(const HSet& hset, double j_constant, NormalStream& rng) {
    if (!(j_constant > 0.0)) throw std::domain_error("sample_limit_field: J must be positive");
    const std::size_t r = hset.size();
    LimitSample out;
    out.h_values = hset.values;
    out.j_constant = j_constant;
    out.w_values.assign(r, 0.0);
    out.loglik.assign(r, 0.0);

    std::size_t first_nonneg = 0;
    while (first_nonneg < r && hset.values[first_nonneg] < 0.0) ++first_nonneg;

    double w = 0.0, prev = 0.0;
    for (std::size_t i = first_nonneg; i-- > 0;) {  // toward -infinity
        const double u = std::abs(hset.values[i]) * j_constant;
        w += std::sqrt(u - prev) * rng.next();
        prev = u;
        out.w_values[i] = w;
    }
    w = 0.0;
    prev = 0.0;
    for (std::size_t i = first_nonneg; i < r; ++i) {
        const double u = hset.values[i] * j_constant;
        if (u > 0.0) {
            w += std::sqrt(u - prev) * rng.next();
            prev = u;
        }
        out.w_values[i] = w;  // exactly 0 at h = 0
    }
    for (std::size_t i = 0; i < r; ++i)
        out.loglik[i] =
            out.w_values[i] - 0.5 * std::abs(hset.values[i]) * j_constant;
    return out;
}

inline LimitSample sample_limit_field(const HSet& hset, double j_constant, std::uint64_t seed,
                                      std::uint64_t stream = 0) {
    NormalStream rng(seed, stream);
    return sample_limit_field(hset, j_constant, rng);
}

// int over [lo, hi] of 1/sigma^2(eta_s) ds by left-point cell overlap;
// exact for constant sigma on any grid, and exact at the interval
// endpoints when the grid has been refined there.
inline double integrate_inv_sigma_sq(const Path& path, const ModelSpec& model, double lo,
                                     double hi) {
    if (!(hi > lo)) return 0.0;
    auto it = std::upper_bound(path.times.begin(), path.times.end(), lo);
    std::size_t i = (it == path.times.begin())
                        ? 0
                        : static_cast<std::size_t>(it - path.times.begin()) - 1;
    double acc = 0.0;
    for (; i + 1 < path.times.size() && path.times[i] < hi; ++i) {
        const double overlap =
            std::min(path.times[i + 1], hi) - std::max(path.times[i], lo);
        if (overlap <= 0.0) continue;
        const double sigma = model.sigma(path.values[i]);
        acc += overlap / (sigma * sigma);
    }
    return acc;
}

// int_0^{tn} j^{h1,n} j^{h2,n} / sigma^2 ds in the disjoint regime, by
// exact interval arithmetic on the piecewise-constant product. Opposite
// signs give a deterministic exact zero; matching signs reduce to
// (j^{h~,n})^2 with h~ the smaller local parameter in absolute value.
inline double cross_product_check(const Path& path, const ModelSpec& model,
                                  const PiecewiseSignal& signal, double theta, double n,
                                  double h1, double h2, double t) {
    if (!(t > 0.0)) throw std::domain_error("cross_product_check: t must be positive");
    const double d = std::max(std::abs(h1), std::abs(h2));
    if (d == 0.0) return 0.0;
    const long long n_int = static_cast<long long>(std::llround(n));
    const long long n0 = disjointness_threshold(theta, d, t, signal.jump_times);
    if (n_int < n0)
        throw RegimeError("cross_product_check: n below the disjointness threshold");
    const double horizon = t * n;
    for (double h : {h1, h2}) {
        if (h == 0.0) continue;
        JumpFunctional jf{theta, h, n_int, signal};
        if (support_intervals(jf, horizon).overlap)
            throw RegimeError("cross_product_check: overlapping supporting intervals");
    }
    const bool same_sign = (h1 > 0.0 && h2 > 0.0) || (h1 < 0.0 && h2 < 0.0);
    if (!same_sign) return 0.0;

    const double h_tilde = (h1 < 0.0) ? -std::min(std::abs(h1), std::abs(h2))
                                      : std::min(h1, h2);
    JumpFunctional jf{theta, h_tilde, n_int, signal};
    const auto sup = support_intervals(jf, horizon);
    double acc = 0.0;
    for (const auto& iv : sup.intervals) {
        const double rho = iv.value;
        acc += rho * rho *
               integrate_inv_sigma_sq(path, model, iv.left, std::min(iv.right, horizon));
    }
    return acc;
}

// Lemma 3.1 comparison: lhs = sum_k int over the k-th shrinking interval of
// 1/sigma^2; rhs = |h| n^{-2} sum_k k / sigma^2(eta_{theta(k+r)}).
struct IntervalSumPair {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline IntervalSumPair interval_sum_check(const Path& path, const ModelSpec& model,
                                          double theta, double r, double h, double n,
                                          long long m) {
    if (!(theta > 0.0) || !(r > 0.0) || !(r < 1.0))
        throw std::domain_error("interval_sum_check: bad theta or r");
    if (h == 0.0) return {};
    const double zeta = theta + h / (n * n);
    if (!(zeta > 0.0)) throw std::domain_error("interval_sum_check: theta + h/n^2 <= 0");
    const double outer = std::max(theta, zeta) * (static_cast<double>(m) + r);
    if (outer > path.horizon() + detail::grid_tolerance(outer))
        throw InsufficientHorizon("interval_sum_check: horizon too short");
    IntervalSumPair out;
    for (long long k = 0; k <= m; ++k) {
        const double kr = static_cast<double>(k) + r;
        const double lo = std::min(theta, zeta) * kr;
        const double hi = std::max(theta, zeta) * kr;
        out.lhs += integrate_inv_sigma_sq(path, model, lo, hi);
        const double sigma = model.sigma(path.values[grid_index(path, theta * kr)]);
        out.rhs += static_cast<double>(k) / (sigma * sigma);
    }
    out.rhs *= std::abs(h) / (n * n);
    return out;
}

// ---- finite-dimensional convergence of the prelimit likelihoods --------

struct FdPerN {
    double n = 0.0;
    std::vector<double> mean_loglik;   // per h
    std::vector<double> mean_se;       // per h
    std::vector<double> mean_rel_dev;  // per h, against -|h| J / 2
    std::vector<double> cov;           // r x r empirical covariance
    double max_rel_mean_dev = 0.0;
    double max_same_sign_cov_rel_dev = 0.0;
    double max_cross_cov_abs = 0.0;
    double max_cross_cov_se = 0.0;  // se at the worst cross-sign entry
};

struct FdReport {
    double theta = 0.0;
    double j_hat = 0.0;
    std::vector<double> h_values;
    int replicates = 0;
    int aborted = 0;
    std::vector<FdPerN> per_n;
};

// Simulates M paths per n under theta, computes the local log-likelihood
// vector over the h-set at scale n^{-2}, and compares empirical moments
// against the limit experiment with the calibrated J.
inline FdReport fd_convergence_check(const ModelSpec& model, const PiecewiseSignal& signal,
                                     double theta, const std::vector<double>& n_values,
                                     const HSet& hset, int replicates, std::uint64_t seed,
                                     unsigned threads = 0, double dt_base = 0.0,
                                     double calibration_horizon = 0.0) {
    if (replicates < 2) throw std::invalid_argument("fd_convergence_check: replicates < 2");
    double n_max = 0.0;
    for (double n : n_values) n_max = std::max(n, n_max);

    FdReport report;
    report.theta = theta;
    report.h_values = hset.values;
    report.replicates = replicates;

    {
        const double horizon =
            calibration_horizon > 0.0 ? calibration_horizon : 50.0 * n_max;
        SimConfig cfg;
        cfg.horizon = horizon;
        cfg.dt_base = dt_base;
        cfg.seed = seed;
        cfg.stream = substream(0xCA11B, 1);
        const Path calib = simulate(model, SignalSpec(signal), theta, cfg);
        const long long m =
            static_cast<long long>(std::floor(horizon / theta)) - kDefaultBurnInPeriods - 2;
        report.j_hat = estimate_J(calib, model, signal, theta, m);
    }

    const std::size_t r = hset.size();
    for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
        const double n = n_values[ni];
        std::vector<std::vector<double>> loglik(r);
        for (auto& v : loglik) v.assign(replicates, 0.0);
        std::vector<std::uint8_t> ok(replicates, 0);

        parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t rep) {
            SimConfig cfg;
            cfg.horizon = n;
            cfg.dt_base = dt_base;
            cfg.seed = seed;
            cfg.stream = substream(ni + 16, rep);
            cfg.refine_points = local_refine_points(signal, theta, hset.values, n, n);
            try {
                const Path path = simulate(model, SignalSpec(signal), theta, cfg);
                for (std::size_t hi = 0; hi < r; ++hi) {
                    const double h = hset.values[hi];
                    const double zeta = theta + h / (n * n);
                    loglik[hi][rep] =
                        h == 0.0 ? 0.0
                                 : log_likelihood_ratio(path, model, SignalSpec(signal), zeta,
                                                        theta, n);
                }
                ok[rep] = 1;
            } catch (const SimulationDiverged&) {
            } catch (const GridAlignmentError&) {
            }
        });

        std::vector<std::vector<double>> used(r);
        for (int rep = 0; rep < replicates; ++rep) {
            if (!ok[rep]) {
                ++report.aborted;
                continue;
            }
            for (std::size_t hi = 0; hi < r; ++hi) used[hi].push_back(loglik[hi][rep]);
        }
        const std::size_t m_used = used.empty() ? 0 : used[0].size();
        if (m_used < 2) throw RunAbortError("fd_convergence_check: too few usable replicates");

        FdPerN row;
        row.n = n;
        row.cov.assign(r * r, 0.0);
        std::vector<double> means(r);
        for (std::size_t hi = 0; hi < r; ++hi) {
            means[hi] = stats::mean(used[hi]);
            row.mean_loglik.push_back(means[hi]);
            row.mean_se.push_back(stats::mean_stderr(used[hi]));
            const double h = hset.values[hi];
            const double target = -0.5 * std::abs(h) * report.j_hat;
            row.mean_rel_dev.push_back(
                h == 0.0 ? 0.0 : std::abs(means[hi] - target) / std::abs(target));
        }
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < m_used; ++k)
                    acc += (used[i][k] - means[i]) * (used[j][k] - means[j]);
                row.cov[i * r + j] = acc / static_cast<double>(m_used - 1);
            }

        const auto target_cov = covariance_matrix(hset);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < r; ++j) {
                const double hi_v = hset.values[i], hj_v = hset.values[j];
                if (hi_v == 0.0 || hj_v == 0.0) continue;
                const double target = report.j_hat * target_cov[i * r + j];
                const double c = row.cov[i * r + j];
                if (target != 0.0) {
                    row.max_same_sign_cov_rel_dev = std::max(
                        row.max_same_sign_cov_rel_dev, std::abs(c - target) / target);
                } else {
                    // se of a sample covariance with zero target
                    const double se = std::sqrt(
                        (row.cov[i * r + i] * row.cov[j * r + j] + c * c) /
                        static_cast<double>(m_used - 1));
                    if (std::abs(c) > row.max_cross_cov_abs) {
                        row.max_cross_cov_abs = std::abs(c);
                        row.max_cross_cov_se = se;
                    }
                }
            }
            row.max_rel_mean_dev = std::max(row.max_rel_mean_dev, row.mean_rel_dev[i]);
        }
        report.per_n.push_back(std::move(row));
    }
    if (report.aborted >
        static_cast<int>(0.01 * static_cast<double>(replicates) *
                         static_cast<double>(n_values.size())))
        throw RunAbortError("fd_convergence_check: more than 1% of replicates aborted");
    return report;
}

// ---- estimation risk in the limit model --------------------------------

struct EstimatorGrid {
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.0;
};

inline EstimatorGrid default_bayes_mle_grid(double j_constant) {
    return {-20.0 / j_constant, 20.0 / j_constant, 0.005 / j_constant};
}

struct RiskReport {
    double mle_mse = 0.0;
    double mle_se = 0.0;
    double bayes_mse = 0.0;
    double bayes_se = 0.0;
    double pooled_se = 0.0;
    double mse_ratio = 0.0;  // bayes / mle
    double mle_mean = 0.0;
    double bayes_mean = 0.0;
    int boundary_hits = 0;
    int used = 0;
};

// Per draw: sample the limit field centered at h_true (additive terms
// constant in h drop from both the argmax and the posterior mean), take the
// grid argmax (ties resolved to the midpoint of the argmax set) and the
// posterior mean under the uniform prior on the grid.
inline RiskReport mle_vs_bayes(double j_constant, double h_true, const EstimatorGrid& grid,
                               int draws, std::uint64_t seed, unsigned threads = 0) {
    if (!(j_constant > 0.0)) throw std::domain_error("mle_vs_bayes: J must be positive");
    if (draws < 2) throw std::invalid_argument("mle_vs_bayes: draws < 2");
    if (grid.lo > h_true - 10.0 / j_constant || grid.hi < h_true + 10.0 / j_constant)
        throw MarginError("mle_vs_bayes: grid must cover h_true with margin 10/J");
    if (!(grid.step > 0.0) || grid.step > 0.01 / j_constant)
        throw MarginError("mle_vs_bayes: grid step must be positive and <= 0.01/J");

    const std::size_t count =
        static_cast<std::size_t>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9)) + 1;
    std::vector<double> h_grid(count);
    for (std::size_t i = 0; i < count; ++i)
        h_grid[i] = grid.lo + static_cast<double>(i) * grid.step;

    std::vector<double> mle(draws), bayes(draws);
    std::vector<std::uint8_t> boundary(draws, 0);
    parallel_for(static_cast<std::size_t>(draws), threads, [&](std::size_t draw) {
        NormalStream rng(seed, substream(3, draw));
        // W~ at u_i = (h_i - h_true) J, cumulated outward from u = 0
        std::vector<double> field(count);
        std::size_t split = 0;  // first index with u >= 0
        while (split < count && h_grid[split] < h_true) ++split;
        double w = 0.0, prev = 0.0;
        for (std::size_t i = split; i-- > 0;) {
            const double u = (h_true - h_grid[i]) * j_constant;
            w += std::sqrt(u - prev) * rng.next();
            prev = u;
            field[i] = w - 0.5 * u;
        }
        w = 0.0;
        prev = 0.0;
        for (std::size_t i = split; i < count; ++i) {
            const double u = (h_grid[i] - h_true) * j_constant;
            if (u > 0.0) {
                w += std::sqrt(u - prev) * rng.next();
                prev = u;
            }
            field[i] = w - 0.5 * u;
        }

        double best = field[0];
        for (double v : field) best = std::max(best, v);
        std::size_t first = count, last = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (field[i] == best) {
                first = std::min(first, i);
                last = std::max(last, i);
            }
        }
        if (first == 0 || last == count - 1) boundary[draw] = 1;
        mle[draw] = 0.5 * (h_grid[first] + h_grid[last]);

        double wsum = 0.0, hsum = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double weight = std::exp(field[i] - best);
            wsum += weight;
            hsum += h_grid[i] * weight;
        }
        bayes[draw] = hsum / wsum;
    });

    RiskReport report;
    std::vector<double> mle_sq, bayes_sq, mle_used, bayes_used;
    for (int d = 0; d < draws; ++d) {
        if (boundary[d]) {
            ++report.boundary_hits;
            continue;
        }
        const double em = mle[d] - h_true;
        const double eb = bayes[d] - h_true;
        mle_sq.push_back(em * em);
        bayes_sq.push_back(eb * eb);
        mle_used.push_back(mle[d]);
        bayes_used.push_back(bayes[d]);
    }
    if (report.boundary_hits > static_cast<int>(0.01 * draws))
        throw MarginError("mle_vs_bayes: more than 1% of draws hit the grid boundary");
    report.used = static_cast<int>(mle_sq.size());
    report.mle_mse = stats::mean(mle_sq);
    report.mle_se = stats::mean_stderr(mle_sq);
    report.bayes_mse = stats::mean(bayes_sq);
    report.bayes_se = stats::mean_stderr(bayes_sq);
    report.pooled_se = std::sqrt(report.mle_se * report.mle_se +
                                 report.bayes_se * report.bayes_se);
    report.mse_ratio = report.bayes_mse / report.mle_mse;
    report.mle_mean = stats::mean(mle_used);
    report.bayes_mean = stats::mean(bayes_used);
    return report;
}

}  // namespace peridrift
