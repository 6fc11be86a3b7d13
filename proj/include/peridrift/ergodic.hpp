#pragma once

// Path-functional time averages: the laws of large numbers behind the
// limit constants. C(theta, f) is the a.s. limit of (1/t) int_0^t
// f(s/theta)/sigma^2(eta_s) ds; its grid-point and regularly-varying
// weighted variants converge to the same constant, the Fisher information
// of the smooth experiment is (1/(3 theta^4)) C(theta, [S0']^2), and the
// jump experiment scales by J(theta, r, rho) = (1/(2 theta^2)) sum_j rho_j^2
// [mu P_{0, r_j theta}](1/sigma^2). The invariant measure is never built;
// it is only ever touched through these averages.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "peridrift/errors.hpp"
#include "peridrift/model.hpp"
#include "peridrift/sde.hpp"
#include "peridrift/signal.hpp"

namespace peridrift {

struct PeriodicWeight {
    std::function<double(double)> f;  // measurable, 1-periodic, in [0, bound]
    double bound = 1.0;
};

inline PeriodicWeight unit_weight() {
    return {[](double) { return 1.0; }, 1.0};
}

// Power weight H(t) = t^index, index > 0; the only regularly varying class
// shipped (slowly varying factors are out of scope).
struct RegularWeight {
    double index = 1.0;

    double operator()(double t) const { return std::pow(t, index); }

    // Exact integral of H over a grid cell.
    double cell_integral(double a, double b) const {
        const double p = index + 1.0;
        return (std::pow(b, p) - std::pow(a, p)) / p;
    }
};

// Periods to discard before grid-point averages start (x0 is not drawn
// from the invariant law).
inline constexpr long long kDefaultBurnInPeriods = 10;

// (1/T) int_0^T f(s/theta) / sigma^2(eta_s) ds, left-point quadrature.
inline double time_average_c(const Path& path, const ModelSpec& model, double theta,
                             const PeriodicWeight& f) {
    if (!(theta > 0.0)) throw std::domain_error("time_average_c: theta must be positive");
    const double horizon = path.horizon();
    if (horizon < theta) throw InsufficientHorizon("time_average_c: horizon < theta");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double sigma = model.sigma(path.values[i]);
        acc += f.f(path.times[i] / theta) / (sigma * sigma) *
               (path.times[i + 1] - path.times[i]);
    }
    return acc / horizon;
}

// Per-batch values of the same average over `batches` equal spans of
// [0, T]; feeds batch-means standard errors.
inline std::vector<double> time_average_c_batches(const Path& path, const ModelSpec& model,
                                                  double theta, const PeriodicWeight& f,
                                                  std::size_t batches) {
    if (batches < 2) throw std::invalid_argument("time_average_c_batches: need >= 2 batches");
    const double horizon = path.horizon();
    std::vector<double> acc(batches, 0.0);
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double sigma = model.sigma(path.values[i]);
        std::size_t bin = static_cast<std::size_t>(path.times[i] / horizon *
                                                   static_cast<double>(batches));
        if (bin >= batches) bin = batches - 1;
        acc[bin] += f.f(path.times[i] / theta) / (sigma * sigma) *
                    (path.times[i + 1] - path.times[i]);
    }
    const double span = horizon / static_cast<double>(batches);
    for (auto& a : acc) a /= span;
    return acc;
}

// (1+rho)/(T H(T)) int_0^T H(s) f(s/theta)/sigma^2(eta_s) ds. The power
// weight is integrated exactly over each cell; the stochastic factor stays
// at the left point, so constant-sigma cases reduce to closed forms.
inline double weighted_time_average(const Path& path, const ModelSpec& model, double theta,
                                    const PeriodicWeight& f, const RegularWeight& weight) {
    if (!(theta > 0.0)) throw std::domain_error("weighted_time_average: theta must be positive");
    const double horizon = path.horizon();
    if (horizon < theta) throw InsufficientHorizon("weighted_time_average: horizon < theta");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double sigma = model.sigma(path.values[i]);
        acc += f.f(path.times[i] / theta) / (sigma * sigma) *
               weight.cell_integral(path.times[i], path.times[i + 1]);
    }
    return (1.0 + weight.index) / (horizon * weight(horizon)) * acc;
}

// Average of 1/sigma^2 over the grid points theta (k + r), k = k0 .. k0+m,
// k0 the burn-in offset; estimates [mu^theta P_{0, r theta}](1/sigma^2).
inline double grid_point_average(const Path& path, const ModelSpec& model, double theta,
                                 double r, long long m,
                                 long long burn_in_periods = kDefaultBurnInPeriods) {
    if (!(theta > 0.0)) throw std::domain_error("grid_point_average: theta must be positive");
    if (!(r > 0.0) || !(r <= 1.0))
        throw std::domain_error("grid_point_average: r must lie in (0,1]");
    if (m < 1) throw std::invalid_argument("grid_point_average: m must be >= 1");
    const long long k0 = std::max<long long>(0, burn_in_periods);
    if (theta * (static_cast<double>(k0 + m) + r) >
        path.horizon() + detail::grid_tolerance(path.horizon()))
        throw InsufficientHorizon("grid_point_average: horizon too short for m periods");
    double acc = 0.0;
    for (long long k = k0; k <= k0 + m; ++k) {
        const double t = theta * (static_cast<double>(k) + r);
        const double sigma = model.sigma(path.values[grid_index(path, t)]);
        acc += 1.0 / (sigma * sigma);
    }
    return acc / static_cast<double>(m + 1);
}

// (1+rho)/(m H(m)) sum_k H(k) / sigma^2(eta_{theta(k+r)}) with the k-index
// counted from the burn-in offset.
inline double weighted_grid_average(const Path& path, const ModelSpec& model, double theta,
                                    double r, long long m, const RegularWeight& weight,
                                    long long burn_in_periods = kDefaultBurnInPeriods) {
    if (!(theta > 0.0)) throw std::domain_error("weighted_grid_average: theta must be positive");
    if (m < 1) throw std::invalid_argument("weighted_grid_average: m must be >= 1");
    const long long k0 = std::max<long long>(0, burn_in_periods);
    if (theta * (static_cast<double>(k0 + m) + r) >
        path.horizon() + detail::grid_tolerance(path.horizon()))
        throw InsufficientHorizon("weighted_grid_average: horizon too short for m periods");
    double acc = 0.0;
    for (long long k = k0; k <= k0 + m; ++k) {
        const double t = theta * (static_cast<double>(k) + r);
        const double sigma = model.sigma(path.values[grid_index(path, t)]);
        acc += weight(static_cast<double>(k - k0)) / (sigma * sigma);
    }
    return (1.0 + weight.index) / (static_cast<double>(m) * weight(static_cast<double>(m))) *
           acc;
}

// (1/n^3) int_0^n [dS/dtheta]^2 / sigma^2 ds, a consistent estimator of the
// Fisher information (1/(3 theta^4)) C(theta, [S0']^2). Left-point sum on
// the simulation grid, matching the likelihood discretization.
inline double estimate_fisher_info(const Path& path, const ModelSpec& model,
                                   const SignalSpec& signal, double theta, double n) {
    if (!is_smooth(signal))
        throw UnsupportedOperation("estimate_fisher_info: piecewise signal");
    if (!(theta > 0.0)) throw std::domain_error("estimate_fisher_info: theta must be positive");
    if (path.horizon() + detail::grid_tolerance(n) < n)
        throw InsufficientHorizon("estimate_fisher_info: horizon < n");
    const auto& smooth = std::get<SmoothSignal>(signal);
    const double tol = detail::grid_tolerance(n);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.times.size() && path.times[i + 1] <= n + tol; ++i) {
        const double sdot = eval_theta_derivative(smooth, theta, path.times[i]);
        const double sigma = model.sigma(path.values[i]);
        acc += sdot * sdot / (sigma * sigma) * (path.times[i + 1] - path.times[i]);
    }
    return acc / (n * n * n);
}

// J(theta, r, rho) estimator: (1/(2 theta^2)) sum_j rho_j^2 times the
// grid-point average at r_j.
inline double estimate_J(const Path& path, const ModelSpec& model,
                         const PiecewiseSignal& signal, double theta, long long m,
                         long long burn_in_periods = kDefaultBurnInPeriods) {
    if (!(theta > 0.0)) throw std::domain_error("estimate_J: theta must be positive");
    double acc = 0.0;
    for (std::size_t j = 0; j < signal.size(); ++j) {
        const double rho = signal.jump_heights[j];
        acc += rho * rho *
               grid_point_average(path, model, theta, signal.jump_times[j], m, burn_in_periods);
    }
    return acc / (2.0 * theta * theta);
}

}  // namespace peridrift
