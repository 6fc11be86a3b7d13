#pragma once

// Periodic drift signals. A signal S(theta, t) = S0(t / theta) is built from
// a fixed 1-periodic profile S0: either a C^2 function supplied with its
// first two derivatives, or a piecewise profile declared by jump times
// r_1 < ... < r_l in (0,1], jump heights rho_j, and a 1-periodic Lipschitz
// continuous part, so that S0(t) = sum_j rho_j N_j(t) - S0c(t) with counting
// functions N_j(t) = #{k >= 0 : k + r_j <= t}.
//
// For a piecewise profile and nearby parameters theta, theta + h/n^2, the
// deterministic mismatch functional j^{h,n} is piecewise constant, supported
// on shrinking intervals around the jump epochs theta (k + r_j); those
// intervals, their disjointness threshold n0, and exact evaluation are
// provided here.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "peridrift/errors.hpp"

namespace peridrift {

inline double frac(double x) { return x - std::floor(x); }

struct SmoothSignal {
    std::function<double(double)> s0;         // 1-periodic
    std::function<double(double)> s0_prime;   // 1-periodic
    std::function<double(double)> s0_second;  // 1-periodic
    double bound = 0.0;                       // sup of |S0|, |S0'|, |S0''|

    // Amplitude a when S0(t) = a sin(2 pi t), else 0. Enables an exact
    // rotation-recurrence fast path in hot likelihood scans.
    double harmonic_amplitude = 0.0;

    void check() const {
        if (!s0 || !s0_prime || !s0_second)
            throw std::invalid_argument("SmoothSignal: missing evaluator");
        if (!(bound > 0.0)) throw std::invalid_argument("SmoothSignal: bound must be positive");
    }
};

struct PiecewiseSignal {
    std::vector<double> jump_times;              // r_j, strictly increasing, in (0,1]
    std::vector<double> jump_heights;            // rho_j != 0
    std::function<double(double)> continuous_part;  // S0c, 1-periodic Lipschitz
    double lipschitz_const = 0.0;

    std::size_t size() const { return jump_times.size(); }

    void check() const {
        if (jump_times.empty()) throw std::invalid_argument("PiecewiseSignal: needs >= 1 jump");
        if (jump_times.size() != jump_heights.size())
            throw std::invalid_argument("PiecewiseSignal: times/heights size mismatch");
        for (std::size_t j = 0; j < jump_times.size(); ++j) {
            if (!(jump_times[j] > 0.0) || !(jump_times[j] <= 1.0))
                throw std::invalid_argument("PiecewiseSignal: jump times must lie in (0,1]");
            if (j > 0 && !(jump_times[j] > jump_times[j - 1]))
                throw std::invalid_argument("PiecewiseSignal: jump times must be increasing");
            if (jump_heights[j] == 0.0)
                throw std::invalid_argument("PiecewiseSignal: zero jump height");
        }
        if (!continuous_part) throw std::invalid_argument("PiecewiseSignal: missing S0c");
        if (lipschitz_const < 0.0)
            throw std::invalid_argument("PiecewiseSignal: negative Lipschitz constant");
    }
};

using SignalSpec = std::variant<SmoothSignal, PiecewiseSignal>;

inline bool is_smooth(const SignalSpec& sig) {
    return std::holds_alternative<SmoothSignal>(sig);
}

// Unit-period profile value. Cadlag convention: the jump value is attained
// at the jump time itself, matching N_j = sum_k 1_{[k+r_j, inf)}. A jump
// declared at r_j = 1 lands on the period boundary and shows up in the jump
// machinery only, not in the periodic profile.
inline double eval_profile(const PiecewiseSignal& sig, double u) {
    const double v = frac(u);
    double acc = 0.0;
    for (std::size_t j = 0; j < sig.size(); ++j)
        if (v >= sig.jump_times[j]) acc += sig.jump_heights[j];
    return acc - sig.continuous_part(v);
}

inline double eval_signal(const SmoothSignal& sig, double theta, double t) {
    if (!(theta > 0.0)) throw std::domain_error("eval_signal: theta must be positive");
    return sig.s0(t / theta);
}

inline double eval_signal(const PiecewiseSignal& sig, double theta, double t) {
    if (!(theta > 0.0)) throw std::domain_error("eval_signal: theta must be positive");
    return eval_profile(sig, t / theta);
}

inline double eval_signal(const SignalSpec& sig, double theta, double t) {
    return std::visit([&](const auto& s) { return eval_signal(s, theta, t); }, sig);
}

// dS/dtheta for smooth profiles: -(t / theta^2) S0'(t / theta).
inline double eval_theta_derivative(const SmoothSignal& sig, double theta, double t) {
    if (!(theta > 0.0)) throw std::domain_error("eval_theta_derivative: theta must be positive");
    return -(t / (theta * theta)) * sig.s0_prime(t / theta);
}

inline double eval_theta_derivative(const SignalSpec& sig, double theta, double t) {
    if (!is_smooth(sig))
        throw UnsupportedOperation("eval_theta_derivative: piecewise signal has no theta-derivative");
    return eval_theta_derivative(std::get<SmoothSignal>(sig), theta, t);
}

// N_j(t) = #{k >= 0 : k + r_j <= t}. Index j is 0-based.
inline long long counting_function(const PiecewiseSignal& sig, std::size_t j, double t) {
    if (j >= sig.size()) throw std::invalid_argument("counting_function: jump index out of range");
    const double x = t - sig.jump_times[j];
    if (x < 0.0) return 0;
    return static_cast<long long>(std::floor(x)) + 1;
}

// Deterministic mismatch functional between theta and theta + h/n^2.
struct JumpFunctional {
    double theta = 1.0;
    double h = 0.0;
    long long n = 1;
    PiecewiseSignal signal;

    double zeta() const {
        return theta + h / (static_cast<double>(n) * static_cast<double>(n));
    }

    void check() const {
        if (!(theta > 0.0)) throw std::domain_error("JumpFunctional: theta must be positive");
        if (n < 1) throw std::domain_error("JumpFunctional: n must be >= 1");
        if (!(zeta() > 0.0)) throw std::domain_error("JumpFunctional: theta + h/n^2 <= 0");
        signal.check();
    }
};

struct SupportInterval {
    double left = 0.0;
    double right = 0.0;
    double value = 0.0;      // rho_j carried on the interval
    std::size_t jump_index = 0;
    long long k = 0;
};

struct SupportIntervals {
    std::vector<SupportInterval> intervals;  // sorted by left endpoint
    bool overlap = false;                    // any two intervals intersect
};

// Maximal intervals supporting j^{h,n} up to `horizon` (intervals whose left
// endpoint does not exceed it). For h<0 these are
// [ (theta+h/n^2)(k+r_j), theta(k+r_j) ], mirrored for h>0. Endpoints are
// computed as direct products, never by division, so membership tests in
// eval_jump_functional are exact.
inline SupportIntervals support_intervals(const JumpFunctional& jf, double horizon) {
    jf.check();
    SupportIntervals out;
    if (jf.h == 0.0 || horizon < 0.0) return out;
    const double zeta = jf.zeta();
    const double lo = std::min(jf.theta, zeta);
    const double hi = std::max(jf.theta, zeta);
    for (std::size_t j = 0; j < jf.signal.size(); ++j) {
        const double r = jf.signal.jump_times[j];
        const double rho = jf.signal.jump_heights[j];
        for (long long k = 0;; ++k) {
            const double kr = static_cast<double>(k) + r;
            const double left = lo * kr;
            if (left > horizon) break;
            out.intervals.push_back({left, hi * kr, rho, j, k});
        }
    }
    std::sort(out.intervals.begin(), out.intervals.end(),
              [](const SupportInterval& a, const SupportInterval& b) {
                  if (a.left != b.left) return a.left < b.left;
                  return a.right < b.right;
              });
    double max_right = -std::numeric_limits<double>::infinity();
    for (const auto& iv : out.intervals) {
        if (iv.left <= max_right) out.overlap = true;
        max_right = std::max(max_right, iv.right);
    }
    return out;
}

namespace detail {

// #{k >= 0 : lo*(k+r) <= s <= hi*(k+r)} for 0 < lo <= hi, closed interval.
// Membership uses the same products as support_intervals.
template <typename Member>
long long count_intervals_containing(double s, double r, double lo, double hi, Member member) {
    if (s < 0.0) return 0;
    // k + r must be >= s/hi and <= s/lo; pad the scan by one on each side
    // to absorb the floating-point rounding of the quotients.
    const long long k_lo = std::max<long long>(
        0, static_cast<long long>(std::floor(s / hi - r)) - 1);
    const long long k_hi = static_cast<long long>(std::floor(s / lo - r)) + 1;
    long long count = 0;
    for (long long k = k_lo; k <= k_hi; ++k) {
        if (k < 0) continue;
        const double kr = static_cast<double>(k) + r;
        if (member(lo * kr, hi * kr)) ++count;
    }
    return count;
}

}  // namespace detail

// j^{h,n}_theta(s), evaluated exactly as the counting-function differences
// of its definition: for h<0, sum_j rho_j [N_j(s/(theta+h/n^2)) - N_j(s/theta)],
// order flipped for h>0. The value is therefore attained on
// [min(theta,zeta)(k+r_j), max(theta,zeta)(k+r_j)) -- half-open at the
// endpoint whose counting function closes the interval. This is the only
// convention under which the sign-orthogonality j^{h1,n} j^{h2,n} = 0 is
// exact at the shared epoch theta(k+r_j).
inline double eval_jump_functional(const JumpFunctional& jf, double s) {
    jf.check();
    if (s < 0.0) throw std::domain_error("eval_jump_functional: s must be >= 0");
    if (jf.h == 0.0) return 0.0;
    const double zeta = jf.zeta();
    const double lo = std::min(jf.theta, zeta);
    const double hi = std::max(jf.theta, zeta);
    double acc = 0.0;
    for (std::size_t j = 0; j < jf.signal.size(); ++j) {
        const long long c = detail::count_intervals_containing(
            s, jf.signal.jump_times[j], lo, hi,
            [s](double l, double r) { return l <= s && s < r; });
        acc += jf.signal.jump_heights[j] * static_cast<double>(c);
    }
    return acc;
}

// Signed mismatch sum_j rho_j [N_j(s/zeta) - N_j(s/theta)] with the
// half-open convention (value attained at the left endpoint, dropped at the
// right), which is what left-point quadrature of likelihood integrands
// needs. Equals +j^{h,n} for h<0 and -j^{h,n} for h>0 away from endpoints.
inline double signed_jump_mismatch(const PiecewiseSignal& sig, double theta, double zeta,
                                   double s) {
    if (!(theta > 0.0) || !(zeta > 0.0))
        throw std::domain_error("signed_jump_mismatch: parameters must be positive");
    if (zeta == theta || s < 0.0) return 0.0;
    const double lo = std::min(theta, zeta);
    const double hi = std::max(theta, zeta);
    const double sign = (zeta < theta) ? 1.0 : -1.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < sig.size(); ++j) {
        const long long c = detail::count_intervals_containing(
            s, sig.jump_times[j], lo, hi,
            [s](double l, double r) { return l <= s && s < r; });
        acc += sig.jump_heights[j] * static_cast<double>(c);
    }
    return sign * acc;
}

// Smallest n such that every interval length d*(t0*n/theta + 1)/n^2 stays
// below half the scaled minimal gap between consecutive jump epochs
// {k + r_j}; from there on the supporting intervals are pairwise disjoint
// on [0, t0*n].
inline long long disjointness_threshold(double theta, double d, double t0,
                                        const std::vector<double>& jump_times) {
    if (!(theta > 0.0) || !(d >= 0.0) || !(t0 > 0.0) || jump_times.empty())
        throw std::invalid_argument("disjointness_threshold: bad arguments");
    double gap = 1.0;  // single jump: wrap-around gap is exactly one period
    for (std::size_t j = 0; j + 1 < jump_times.size(); ++j)
        gap = std::min(gap, jump_times[j + 1] - jump_times[j]);
    if (jump_times.size() > 1)
        gap = std::min(gap, jump_times.front() + 1.0 - jump_times.back());
    if (d == 0.0) return 1;
    for (long long n = 1; n < (1LL << 40); ++n) {
        const double nn = static_cast<double>(n);
        if (d * (t0 * nn / theta + 1.0) / (nn * nn) < 0.5 * theta * gap) return n;
    }
    throw std::invalid_argument("disjointness_threshold: no finite threshold");
}

}  // namespace peridrift
