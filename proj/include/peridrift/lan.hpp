#pragma once

// Monte Carlo verification of the smooth-signal limit theory: score
// normality with variance given by the Fisher information, the quadratic
// expansion of local log-likelihoods at scale n^{-3/2}, the cubic time
// change of the score martingale, and the Taylor remainder processes.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "peridrift/ergodic.hpp"
#include "peridrift/errors.hpp"
#include "peridrift/likelihood.hpp"
#include "peridrift/parallel.hpp"
#include "peridrift/sde.hpp"
#include "peridrift/stats.hpp"

namespace peridrift {

struct LanReport {
    double theta = 0.0;
    std::vector<double> n_values;
    std::vector<double> h_values;
    int replicates = 0;
    int aborted = 0;

    // per n
    std::vector<double> score_mean;
    std::vector<double> score_var;
    std::vector<double> fisher_mean;
    std::vector<double> ks_statistic;  // of score / sqrt(pooled fisher)

    // per (n, h)
    std::vector<std::vector<double>> residual_median;
    std::vector<std::vector<double>> remainder_u_median;
    std::vector<std::vector<double>> remainder_v_median;
};

// Taylor remainder processes at the proof's local scale delta_n =
// sqrt(3/n^3): U integrates the squared remainder of S(theta_n, s) around
// theta, V the cross term with the linearization.
struct RemainderDiagnostics {
    double u = 0.0;
    double v = 0.0;
};

inline RemainderDiagnostics remainder_diagnostics(const Path& path, const ModelSpec& model,
                                                  const SmoothSignal& signal, double theta,
                                                  double n, double h) {
    const double delta = std::sqrt(3.0 / (n * n * n));
    const double theta_n = theta + delta * h;
    if (!(theta_n > 0.0))
        throw std::domain_error("remainder_diagnostics: theta + h sqrt(3/n^3) <= 0");
    if (h == 0.0) return {};
    RemainderDiagnostics out;
    const std::size_t cells = detail::cells_within(path, n);
    for (std::size_t i = 0; i < cells; ++i) {
        const double t = path.times[i];
        const double step = path.times[i + 1] - t;
        const double sigma = model.sigma(path.values[i]);
        const double linear = (theta_n - theta) * eval_theta_derivative(signal, theta, t);
        const double diff =
            eval_signal(signal, theta_n, t) - eval_signal(signal, theta, t) - linear;
        out.u += diff * diff / (sigma * sigma) * step;
        out.v += diff * linear / (sigma * sigma) * step;
    }
    return out;
}

inline LanReport run_lan_experiment(const ModelSpec& model, const SmoothSignal& signal,
                                    double theta, std::vector<double> n_values,
                                    std::vector<double> h_values, int replicates,
                                    std::uint64_t seed, unsigned threads = 0,
                                    double dt_base = 0.0) {
    if (replicates < 50)
        throw std::invalid_argument("run_lan_experiment: needs >= 50 replicates");
    for (double n : n_values)
        for (double h : h_values)
            if (!(theta + h * std::pow(n, -1.5) > 0.0))
                throw std::domain_error("run_lan_experiment: local parameter leaves Theta");

    LanReport report;
    report.theta = theta;
    report.n_values = std::move(n_values);
    report.h_values = std::move(h_values);
    report.replicates = replicates;

    const SignalSpec spec{signal};
    const std::size_t hcount = report.h_values.size();
    for (std::size_t ni = 0; ni < report.n_values.size(); ++ni) {
        const double n = report.n_values[ni];
        std::vector<double> scores(replicates), fishers(replicates);
        std::vector<std::vector<double>> residuals(hcount), rem_u(hcount), rem_v(hcount);
        for (auto& r : residuals) r.assign(replicates, 0.0);
        for (auto& r : rem_u) r.assign(replicates, 0.0);
        for (auto& r : rem_v) r.assign(replicates, 0.0);
        std::vector<std::uint8_t> ok(replicates, 0);

        parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t rep) {
            SimConfig cfg;
            cfg.horizon = n;
            cfg.dt_base = dt_base;
            cfg.seed = seed;
            cfg.stream = substream(ni, rep);
            try {
                const Path path = simulate(model, spec, theta, cfg);
                const double score = score_statistic(path, model, spec, theta, n);
                const double fisher = estimate_fisher_info(path, model, spec, theta, n);
                scores[rep] = score;
                fishers[rep] = fisher;
                for (std::size_t hi = 0; hi < hcount; ++hi) {
                    const double h = report.h_values[hi];
                    const double loglik =
                        h == 0.0 ? 0.0
                                 : log_likelihood_ratio(path, model, spec,
                                                        theta + h * std::pow(n, -1.5), theta, n);
                    residuals[hi][rep] = loglik - (h * score - 0.5 * h * h * fisher);
                    const auto rem = remainder_diagnostics(path, model, signal, theta, n, h);
                    rem_u[hi][rep] = rem.u;
                    rem_v[hi][rep] = rem.v;
                }
                ok[rep] = 1;
            } catch (const SimulationDiverged&) {
            } catch (const GridAlignmentError&) {
            }
        });

        std::vector<double> used_scores, used_fishers;
        std::vector<std::vector<double>> used_res(hcount), used_u(hcount), used_v(hcount);
        for (int rep = 0; rep < replicates; ++rep) {
            if (!ok[rep]) {
                ++report.aborted;
                continue;
            }
            used_scores.push_back(scores[rep]);
            used_fishers.push_back(fishers[rep]);
            for (std::size_t hi = 0; hi < hcount; ++hi) {
                used_res[hi].push_back(std::abs(residuals[hi][rep]));
                used_u[hi].push_back(rem_u[hi][rep]);
                used_v[hi].push_back(rem_v[hi][rep]);
            }
        }
        report.score_mean.push_back(stats::mean(used_scores));
        report.score_var.push_back(stats::variance(used_scores));
        const double pooled_fisher = stats::mean(used_fishers);
        report.fisher_mean.push_back(pooled_fisher);
        if (pooled_fisher > 0.0) {
            std::vector<double> z(used_scores.size());
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] = used_scores[i] / std::sqrt(pooled_fisher);
            report.ks_statistic.push_back(stats::ks_statistic_normal(z));
        } else {
            report.ks_statistic.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        report.residual_median.emplace_back();
        report.remainder_u_median.emplace_back();
        report.remainder_v_median.emplace_back();
        for (std::size_t hi = 0; hi < hcount; ++hi) {
            report.residual_median.back().push_back(stats::median(used_res[hi]));
            report.remainder_u_median.back().push_back(stats::median(used_u[hi]));
            report.remainder_v_median.back().push_back(stats::median(used_v[hi]));
        }
    }
    if (report.aborted >
        static_cast<int>(0.01 * static_cast<double>(replicates) *
                         static_cast<double>(report.n_values.size())))
        throw RunAbortError("run_lan_experiment: more than 1% of replicates aborted");
    return report;
}

// Long-run estimate of C(theta, [S0']^2) from a single calibration path
// with burn-in, per the a.s. law of large numbers.
inline double calibrate_c_constant(const ModelSpec& model, const SmoothSignal& signal,
                                   double theta, double horizon, std::uint64_t seed,
                                   double dt_base = 0.0) {
    SimConfig cfg;
    cfg.horizon = horizon;
    cfg.dt_base = dt_base;
    cfg.seed = seed;
    cfg.stream = substream(0xCA11B, 0);
    const Path path = simulate(model, SignalSpec{signal}, theta, cfg);
    const double burn = 10.0 * theta;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double t = path.times[i];
        if (t < burn) continue;
        const double sp = signal.s0_prime(t / theta);
        const double sigma = model.sigma(path.values[i]);
        acc += sp * sp / (sigma * sigma) * (path.times[i + 1] - t);
    }
    return acc / (path.horizon() - burn);
}

struct TimechangeRow {
    double t = 0.0;
    double empirical_var = 0.0;
    double phi = 0.0;  // t^3 / theta^4 * C(theta, [S0']^2)
    double ratio = 0.0;
};

// Empirical variance of M^n_t = sqrt(3/n^3) int_0^{tn} dS/dtheta / sigma dB
// across replicates, against the deterministic time change Phi(t).
inline std::vector<TimechangeRow> martingale_timechange_check(
    const ModelSpec& model, const SmoothSignal& signal, double theta, double n,
    std::vector<double> t_grid, int replicates, std::uint64_t seed, unsigned threads = 0,
    double dt_base = 0.0, double calibration_horizon = 0.0) {
    for (double t : t_grid)
        if (!(t > 0.0) || t > 1.0)
            throw std::domain_error("martingale_timechange_check: t_grid must lie in (0,1]");
    std::sort(t_grid.begin(), t_grid.end());
    const double c_hat = calibrate_c_constant(
        model, signal, theta, calibration_horizon > 0.0 ? calibration_horizon : 50.0 * n,
        seed, dt_base);

    std::vector<std::vector<double>> samples(t_grid.size());
    for (auto& s : samples) s.assign(replicates, 0.0);
    const SignalSpec spec{signal};
    parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t rep) {
        SimConfig cfg;
        cfg.horizon = n;
        cfg.dt_base = dt_base;
        cfg.seed = seed;
        cfg.stream = substream(1, rep);
        const Path path = simulate(model, spec, theta, cfg);
        const double scale = std::sqrt(3.0 / (n * n * n));
        double acc = 0.0;
        std::size_t i = 0;
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            const double t_end = t_grid[ti] * n;
            const double tol = detail::grid_tolerance(t_end);
            for (; i + 1 < path.times.size() && path.times[i + 1] <= t_end + tol; ++i) {
                const double t = path.times[i];
                const double step = path.times[i + 1] - t;
                const double x = path.values[i];
                const double sigma = model.sigma(x);
                const double drift = eval_signal(spec, theta, t) + model.b(x);
                const double db = (path.values[i + 1] - x - drift * step) / sigma;
                acc += eval_theta_derivative(signal, theta, t) / sigma * db;
            }
            samples[ti][rep] = scale * acc;
        }
    });

    std::vector<TimechangeRow> rows;
    for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
        TimechangeRow row;
        row.t = t_grid[ti];
        row.empirical_var = stats::variance(samples[ti]);
        row.phi = row.t * row.t * row.t / (theta * theta * theta * theta) * c_hat;
        row.ratio = row.phi > 0.0 ? row.empirical_var / row.phi
                                  : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace peridrift
