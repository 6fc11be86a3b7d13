#pragma once

// Discretized Girsanov likelihood ratios along an observed path. All
// stochastic integrals are left-point Ito sums on the path grid; the
// innovation increments dB are reconstructed from the path under the
// reference parameter, never taken from the simulator, so the same code
// applies to ingested external series.
//
//   log L_t^{zeta/theta} = sum [dS_i / sigma_i] dB_i
//                        - 1/2 sum [dS_i / sigma_i]^2 step_i,
//   dS_i = S(zeta, t_i) - S(theta, t_i),
//   dB_i = (x_{i+1} - x_i - [S(theta,t_i) + b(x_i)] step_i) / sigma_i.
//
// For smooth signals the local expansion at scale n^{-3/2} is
// h Delta_n - h^2/2 I_n with score Delta_n = n^{-3/2} int dS/dtheta / sigma dB;
// for piecewise signals at scale n^{-2} the leading bracket is built from
// the deterministic jump mismatch.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "peridrift/ergodic.hpp"
#include "peridrift/errors.hpp"
#include "peridrift/model.hpp"
#include "peridrift/sde.hpp"
#include "peridrift/signal.hpp"

namespace peridrift {

struct InnovationIncrements {
    std::vector<double> db;  // one per grid cell
};

inline InnovationIncrements innovations(const Path& path, const ModelSpec& model,
                                        const SignalSpec& signal, double theta) {
    if (!(theta > 0.0)) throw std::domain_error("innovations: theta must be positive");
    InnovationIncrements out;
    out.db.resize(path.steps());
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double step = path.times[i + 1] - path.times[i];
        const double x = path.values[i];
        const double drift = eval_signal(signal, theta, path.times[i]) + model.b(x);
        out.db[i] = (path.values[i + 1] - x - drift * step) / model.sigma(x);
    }
    return out;
}

namespace detail {

// Number of whole grid cells inside [0, t_end].
inline std::size_t cells_within(const Path& path, double t_end) {
    const double tol = grid_tolerance(t_end);
    std::size_t count = 0;
    while (count + 1 < path.times.size() && path.times[count + 1] <= t_end + tol) ++count;
    return count;
}

}  // namespace detail

// S(zeta, t) - S(theta, t). For piecewise signals the jump part is computed
// by exact interval arithmetic (the same endpoint products that define the
// supporting intervals), not by dividing t back into the unit period:
// division rounding at the refined epoch grid points would otherwise flip
// indicators against the mismatch functional.
inline double signal_difference(const SignalSpec& signal, double zeta, double theta, double t) {
    if (const auto* pw = std::get_if<PiecewiseSignal>(&signal)) {
        const double cont =
            pw->continuous_part(frac(t / zeta)) - pw->continuous_part(frac(t / theta));
        return signed_jump_mismatch(*pw, theta, zeta, t) - cont;
    }
    const auto& smooth = std::get<SmoothSignal>(signal);
    return smooth.s0(t / zeta) - smooth.s0(t / theta);
}

inline double log_likelihood_ratio(const Path& path, const ModelSpec& model,
                                   const SignalSpec& signal, double zeta, double theta,
                                   double t_end) {
    if (!(zeta > 0.0)) throw std::domain_error("log_likelihood_ratio: zeta must be positive");
    if (!(theta > 0.0)) throw std::domain_error("log_likelihood_ratio: theta must be positive");
    if (t_end > path.horizon() + detail::grid_tolerance(t_end))
        throw InsufficientHorizon("log_likelihood_ratio: t_end beyond horizon");
    if (zeta == theta) return 0.0;
    const std::size_t cells = detail::cells_within(path, t_end);
    double martingale = 0.0, bracket = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double t = path.times[i];
        const double step = path.times[i + 1] - t;
        const double x = path.values[i];
        const double sigma = model.sigma(x);
        const double s_theta = eval_signal(signal, theta, t);
        const double ds = signal_difference(signal, zeta, theta, t) / sigma;
        const double db = (path.values[i + 1] - x - (s_theta + model.b(x)) * step) / sigma;
        martingale += ds * db;
        bracket += ds * ds * step;
    }
    return martingale - 0.5 * bracket;
}

// Delta_n = n^{-3/2} int_0^n dS/dtheta (theta, s) / sigma dB_s.
inline double score_statistic(const Path& path, const ModelSpec& model,
                              const SignalSpec& signal, double theta, double n) {
    if (!is_smooth(signal)) throw UnsupportedOperation("score_statistic: piecewise signal");
    if (!(theta > 0.0)) throw std::domain_error("score_statistic: theta must be positive");
    if (n > path.horizon() + detail::grid_tolerance(n))
        throw InsufficientHorizon("score_statistic: horizon < n");
    const auto& smooth = std::get<SmoothSignal>(signal);
    const std::size_t cells = detail::cells_within(path, n);
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double t = path.times[i];
        const double step = path.times[i + 1] - t;
        const double x = path.values[i];
        const double sigma = model.sigma(x);
        const double drift = eval_signal(smooth, theta, t) + model.b(x);
        const double db = (path.values[i + 1] - x - drift * step) / sigma;
        acc += eval_theta_derivative(smooth, theta, t) / sigma * db;
    }
    return acc / std::sqrt(n * n * n);
}

// log L_n^{(theta + h n^{-3/2})/theta} - [h Delta_n - h^2/2 I_n] with both
// Delta_n and I_n estimated from the same path.
inline double quadratic_residual(const Path& path, const ModelSpec& model,
                                 const SignalSpec& signal, double theta, double n, double h) {
    const double zeta = theta + h * std::pow(n, -1.5);
    if (!(zeta > 0.0)) throw std::domain_error("quadratic_residual: theta + h n^{-3/2} <= 0");
    if (h == 0.0) return 0.0;
    const double loglik = log_likelihood_ratio(path, model, signal, zeta, theta, n);
    const double score = score_statistic(path, model, signal, theta, n);
    const double fisher = estimate_fisher_info(path, model, signal, theta, n);
    return loglik - (h * score - 0.5 * h * h * fisher);
}

// log L_{tn}^{(theta + h n^{-2})/theta} minus the jump bracket
// sum j~(t_i)/sigma dB_i - 1/2 sum j~(t_i)^2/sigma^2 step_i, where j~ is the
// signed mismatch sum_j rho_j [N_j(s/zeta) - N_j(s/theta)] (the sign that
// actually cancels the signal difference; for h > 0 the jump functional of
// the definition enters with a minus).
inline double jump_decomposition_residual(const Path& path, const ModelSpec& model,
                                          const PiecewiseSignal& signal, double theta,
                                          double n, double h, double t) {
    if (!(t > 0.0) || t > 1.0)
        throw std::domain_error("jump_decomposition_residual: t must lie in (0,1]");
    const double zeta = theta + h / (n * n);
    if (!(zeta > 0.0))
        throw std::domain_error("jump_decomposition_residual: theta + h n^{-2} <= 0");
    if (h == 0.0) return 0.0;
    const double horizon = t * n;

    // every shrinking interval intersecting [0, horizon) must be resolved by
    // the grid: both endpoints present, or the cell-based sums misweight it
    JumpFunctional jf{theta, h, static_cast<long long>(std::llround(n)), signal};
    const auto sup = support_intervals(jf, horizon);
    for (const auto& iv : sup.intervals) {
        if (iv.left >= horizon) continue;
        try {
            (void)grid_index(path, iv.left);
            if (iv.right <= horizon) (void)grid_index(path, iv.right);
        } catch (const GridAlignmentError&) {
            throw GridAlignmentError(
                "jump_decomposition_residual: shrinking interval not on the grid; refine via "
                "local_refine_points");
        }
    }

    const double loglik =
        log_likelihood_ratio(path, model, SignalSpec(signal), zeta, theta, horizon);
    const std::size_t cells = detail::cells_within(path, horizon);
    double martingale = 0.0, bracket = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double tcur = path.times[i];
        const double jmis = signed_jump_mismatch(signal, theta, zeta, tcur);
        if (jmis == 0.0) continue;
        const double step = path.times[i + 1] - tcur;
        const double x = path.values[i];
        const double sigma = model.sigma(x);
        const double drift = eval_signal(signal, theta, tcur) + model.b(x);
        const double db = (path.values[i + 1] - x - drift * step) / sigma;
        martingale += jmis / sigma * db;
        bracket += jmis * jmis / (sigma * sigma) * step;
    }
    return loglik - (martingale - 0.5 * bracket);
}

enum class LocalRate { kSmooth, kJump };  // local scale n^{-3/2} vs n^{-2}

inline double local_scale(LocalRate rate, double n) {
    return rate == LocalRate::kSmooth ? std::pow(n, -1.5) : 1.0 / (n * n);
}

// Terminal log-likelihood ratios, score, Fisher estimate and residuals for
// one path and a set of local parameters.
struct LocalExperiment {
    double theta_ref = 0.0;
    double n = 0.0;
    LocalRate rate = LocalRate::kSmooth;
    std::vector<double> h_values;
    std::vector<double> loglik;
    std::optional<double> score;
    std::optional<double> fisher;
    std::vector<double> residuals;
};

inline LocalExperiment run_local_experiment(const Path& path, const ModelSpec& model,
                                            const SignalSpec& signal, double theta, double n,
                                            std::vector<double> h_values, LocalRate rate) {
    LocalExperiment exp;
    exp.theta_ref = theta;
    exp.n = n;
    exp.rate = rate;
    exp.h_values = std::move(h_values);
    const double scale = local_scale(rate, n);
    for (double h : exp.h_values) {
        const double zeta = theta + h * scale;
        if (!(zeta > 0.0)) throw std::domain_error("run_local_experiment: local parameter too negative");
        exp.loglik.push_back(h == 0.0 ? 0.0
                                      : log_likelihood_ratio(path, model, signal, zeta, theta,
                                                             rate == LocalRate::kSmooth
                                                                 ? n
                                                                 : n * 1.0));
    }
    if (rate == LocalRate::kSmooth) {
        exp.score = score_statistic(path, model, signal, theta, n);
        exp.fisher = estimate_fisher_info(path, model, signal, theta, n);
        for (double h : exp.h_values)
            exp.residuals.push_back(quadratic_residual(path, model, signal, theta, n, h));
    } else {
        const auto& pw = std::get<PiecewiseSignal>(signal);
        for (double h : exp.h_values)
            exp.residuals.push_back(
                jump_decomposition_residual(path, model, pw, theta, n, h, 1.0));
    }
    return exp;
}

}  // namespace peridrift
