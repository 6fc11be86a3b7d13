#pragma once

// Euler-Maruyama simulation of dX = [S(theta,t) + b(X)] dt + sigma(X) dW on
// a refined time grid, plus the grid-chain / segment-chain views of a path
// and CSV (de)serialization.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "peridrift/errors.hpp"
#include "peridrift/model.hpp"
#include "peridrift/rng.hpp"
#include "peridrift/signal.hpp"

namespace peridrift {

struct SimConfig {
    double dt_base = 0.0;   // 0 selects default_dt(horizon, theta)
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;               // replicate substream
    std::vector<double> refine_points;      // mandatory grid times in [0, horizon]

    void check() const {
        if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be > 0");
        if (dt_base < 0.0) throw std::invalid_argument("SimConfig: dt_base must be >= 0");
    }
};

// Default base step: T*1e-5, capped at 1e-3 * theta_min.
inline double default_dt(double horizon, double theta_min) {
    return std::min(horizon * 1e-5, 1e-3 * theta_min);
}

struct Path {
    std::vector<double> times;   // t_0 = 0 < ... < t_K = horizon
    std::vector<double> values;  // values[0] = x0
    double theta_true = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string model_id;
    std::string signal_id;
    double dt_base = 0.0;

    double horizon() const { return times.empty() ? 0.0 : times.back(); }
    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

namespace detail {

inline double grid_tolerance(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace detail

// Uniform dt grid on [0, T] merged with mandatory refine points; duplicates
// within a relative 1e-9 collapse onto the refine point (exactness at jump
// epochs matters more than uniformity of the base grid).
inline std::vector<double> build_grid(double horizon, double dt,
                                      std::vector<double> refine_points) {
    if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("build_grid: bad inputs");
    std::sort(refine_points.begin(), refine_points.end());
    std::vector<double> grid;
    const std::size_t n_uniform = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    grid.reserve(n_uniform + refine_points.size() + 2);
    std::size_t next_special = 0;
    auto push_specials_below = [&](double t) {
        while (next_special < refine_points.size() && refine_points[next_special] <= t) {
            const double s = refine_points[next_special++];
            if (s < 0.0 || s > horizon) continue;
            if (!grid.empty() && s - grid.back() <= detail::grid_tolerance(s)) continue;
            grid.push_back(s);
        }
    };
    for (std::size_t i = 0; i <= n_uniform; ++i) {
        double t = (i == n_uniform) ? horizon : static_cast<double>(i) * dt;
        push_specials_below(t + detail::grid_tolerance(t));
        if (!grid.empty()) {
            // snap: a uniform point within tolerance of the last special is skipped
            if (t - grid.back() <= detail::grid_tolerance(t)) continue;
        }
        grid.push_back(t);
    }
    push_specials_below(horizon);
    if (grid.back() < horizon - detail::grid_tolerance(horizon)) grid.push_back(horizon);
    return grid;
}

// Jump epochs theta*(k + r_j) of the signal up to the horizon; empty for
// smooth signals.
inline std::vector<double> signal_jump_epochs(const SignalSpec& sig, double theta,
                                              double horizon) {
    std::vector<double> out;
    if (const auto* pw = std::get_if<PiecewiseSignal>(&sig)) {
        for (std::size_t j = 0; j < pw->size(); ++j) {
            for (long long k = 0;; ++k) {
                const double t = theta * (static_cast<double>(k) + pw->jump_times[j]);
                if (t > horizon) break;
                out.push_back(t);
            }
        }
    }
    return out;
}

// Grid refinement for local-parameter experiments: for every h, both
// endpoints and the midpoint of each shrinking interval between theta and
// theta + h * n^{-2}. The spacing of these intervals is O(k/n^2), far below
// any sensible uniform step.
inline std::vector<double> local_refine_points(const PiecewiseSignal& sig, double theta,
                                               std::span<const double> h_values, double n,
                                               double horizon) {
    std::vector<double> out;
    for (double h : h_values) {
        if (h == 0.0) continue;
        JumpFunctional jf{theta, h, static_cast<long long>(std::llround(n)), sig};
        const auto sup = support_intervals(jf, horizon);
        for (const auto& iv : sup.intervals) {
            out.push_back(iv.left);
            out.push_back(0.5 * (iv.left + iv.right));
            out.push_back(iv.right);
        }
    }
    return out;
}

inline Path simulate(const ModelSpec& model, const SignalSpec& signal, double theta,
                     const SimConfig& config) {
    model.check();
    config.check();
    if (!(theta > 0.0)) throw std::domain_error("simulate: theta must be positive");
    const double dt = config.dt_base > 0.0 ? config.dt_base
                                           : default_dt(config.horizon, theta);
    std::vector<double> refine = config.refine_points;
    const auto jumps = signal_jump_epochs(signal, theta, config.horizon);
    refine.insert(refine.end(), jumps.begin(), jumps.end());

    Path path;
    path.times = build_grid(config.horizon, dt, std::move(refine));
    path.values.resize(path.times.size());
    path.values[0] = model.x0;
    path.theta_true = theta;
    path.seed = config.seed;
    path.stream = config.stream;
    path.dt_base = dt;

    NormalStream noise(config.seed, config.stream);
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double t = path.times[i];
        const double x = path.values[i];
        const double step = path.times[i + 1] - t;
        const double drift = eval_signal(signal, theta, t) + model.b(x);
        const double next = x + drift * step + model.sigma(x) * std::sqrt(step) * noise.next();
        if (!std::isfinite(next)) throw SimulationDiverged(path.times[i + 1]);
        path.values[i + 1] = next;
    }
    return path;
}

// Index of the grid point equal to t (within relative 1e-9).
inline std::size_t grid_index(const Path& path, double t) {
    const auto it = std::lower_bound(path.times.begin(), path.times.end(),
                                     t - detail::grid_tolerance(t));
    if (it == path.times.end() || std::abs(*it - t) > detail::grid_tolerance(t))
        throw GridAlignmentError("grid point missing at t=" + std::to_string(t));
    return static_cast<std::size_t>(it - path.times.begin());
}

// (eta_{k theta})_{k=0..floor(T/theta)}.
inline std::vector<double> grid_chain(const Path& path, double theta) {
    if (!(theta > 0.0)) throw std::domain_error("grid_chain: theta must be positive");
    const long long kmax =
        static_cast<long long>(std::floor(path.horizon() / theta + 1e-9));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(kmax) + 1);
    for (long long k = 0; k <= kmax; ++k)
        out.push_back(path.values[grid_index(path, theta * static_cast<double>(k))]);
    return out;
}

// Zero-copy view of the path restricted to [(k-1) theta, k theta].
struct SegmentView {
    std::span<const double> times;
    std::span<const double> values;
};

inline std::vector<SegmentView> segment_chain(const Path& path, double theta) {
    if (!(theta > 0.0)) throw std::domain_error("segment_chain: theta must be positive");
    const long long kmax =
        static_cast<long long>(std::floor(path.horizon() / theta + 1e-9));
    std::vector<SegmentView> out;
    out.reserve(static_cast<std::size_t>(kmax));
    std::size_t prev = grid_index(path, 0.0);
    for (long long k = 1; k <= kmax; ++k) {
        const std::size_t cur = grid_index(path, theta * static_cast<double>(k));
        out.push_back({std::span<const double>(path.times).subspan(prev, cur - prev + 1),
                       std::span<const double>(path.values).subspan(prev, cur - prev + 1)});
        prev = cur;
    }
    return out;
}

// ---- serialization ----------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_path_csv(const Path& path, const std::string& csv_file,
                           const std::string& meta_file = "") {
    std::ofstream out(csv_file);
    if (!out) throw std::runtime_error("cannot open " + csv_file);
    out << "t,x\n";
    for (std::size_t i = 0; i < path.times.size(); ++i)
        out << format_double(path.times[i]) << ',' << format_double(path.values[i]) << '\n';
    if (!meta_file.empty()) {
        std::ofstream meta(meta_file);
        if (!meta) throw std::runtime_error("cannot open " + meta_file);
        meta << "{\n"
             << "  \"theta\": " << format_double(path.theta_true) << ",\n"
             << "  \"seed\": " << path.seed << ",\n"
             << "  \"stream\": " << path.stream << ",\n"
             << "  \"model_id\": \"" << path.model_id << "\",\n"
             << "  \"signal_id\": \"" << path.signal_id << "\",\n"
             << "  \"dt_base\": " << format_double(path.dt_base) << "\n"
             << "}\n";
    }
}

// Reads a `t,x` CSV (header required). Metadata, if any, must be applied by
// the caller; external paths carry no simulation provenance.
inline Path read_path_csv(const std::string& csv_file) {
    std::ifstream in(csv_file);
    if (!in) throw std::runtime_error("cannot open " + csv_file);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,x", 0) != 0)
        throw std::runtime_error("bad path CSV header in " + csv_file);
    Path path;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("bad path CSV row: " + line);
        const double t = std::stod(line.substr(0, comma));
        const double x = std::stod(line.substr(comma + 1));
        if (!path.times.empty() && t <= path.times.back())
            throw std::runtime_error("path CSV times not increasing");
        path.times.push_back(t);
        path.values.push_back(x);
    }
    if (path.times.size() < 2) throw std::runtime_error("path CSV too short");
    return path;
}

// ---- coupled refinement -----------------------------------------------

// Brownian motion tabulated on the dyadic grid {k T / 2^levels}. Values at
// coarse dyadic points do not change when `levels` grows: level l midpoints
// are bridge draws from their own substream.
class DyadicBrownian {
  public:
    DyadicBrownian(std::uint64_t seed, std::uint64_t stream, double horizon, int levels)
        : horizon_(horizon), levels_(levels) {
        const std::size_t n = (static_cast<std::size_t>(1) << levels) + 1;
        values_.assign(n, 0.0);
        {
            NormalStream root(seed, substream(stream, 0));
            values_[n - 1] = std::sqrt(horizon) * root.next();
        }
        for (int level = 1; level <= levels; ++level) {
            NormalStream draws(seed, substream(stream, static_cast<std::uint64_t>(level)));
            const std::size_t stride = (n - 1) >> level;
            const double seg = horizon / static_cast<double>(1ULL << (level - 1));
            for (std::size_t left = 0; left + 2 * stride < n + stride; left += 2 * stride) {
                const std::size_t mid = left + stride;
                const std::size_t right = left + 2 * stride;
                if (right >= n) break;
                values_[mid] = 0.5 * (values_[left] + values_[right]) +
                               0.5 * std::sqrt(seg) * draws.next();
            }
        }
    }

    double horizon() const { return horizon_; }
    int levels() const { return levels_; }

    // W at dyadic index k of level `level` (grid spacing T / 2^level).
    double value(int level, std::size_t k) const {
        const std::size_t stride = ((values_.size() - 1) >> level);
        return values_[k * stride];
    }

  private:
    double horizon_;
    int levels_;
    std::vector<double> values_;
};

// Euler path on the uniform level-`level` dyadic grid driven by a shared
// Brownian motion; used for strong-error coupling checks.
inline Path simulate_on_dyadic(const ModelSpec& model, const SignalSpec& signal, double theta,
                               const DyadicBrownian& w, int level) {
    model.check();
    const std::size_t n = static_cast<std::size_t>(1) << level;
    Path path;
    path.theta_true = theta;
    path.times.resize(n + 1);
    path.values.resize(n + 1);
    const double dt = w.horizon() / static_cast<double>(n);
    for (std::size_t i = 0; i <= n; ++i)
        path.times[i] = (i == n) ? w.horizon() : static_cast<double>(i) * dt;
    path.values[0] = model.x0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = path.values[i];
        const double dw = w.value(level, i + 1) - w.value(level, i);
        const double drift = eval_signal(signal, theta, path.times[i]) + model.b(x);
        const double next = x + drift * dt + model.sigma(x) * dw;
        if (!std::isfinite(next)) throw SimulationDiverged(path.times[i + 1]);
        path.values[i + 1] = next;
    }
    return path;
}

}  // namespace peridrift
