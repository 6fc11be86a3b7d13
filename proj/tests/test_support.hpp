#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <vector>

#include "peridrift/rng.hpp"
#include "peridrift/signal.hpp"

namespace testsupport {

struct JumpConfig {
    double theta = 1.0;
    double t0 = 1.0;
    std::vector<double> jump_times;
    std::vector<double> jump_heights;
    double h1 = 0.0;
    double h2 = 0.0;
    long long n = 0;  // chosen >= disjointness threshold
};

// Randomized jump-experiment configuration in the disjoint regime:
// theta in [0.5, 2], 1..3 jumps with a guaranteed gap, heights in
// +/-[0.5, 2], local parameters in [-2, 2] \ {0}, n >= n0(theta, d, t0).
inline JumpConfig random_jump_config(peridrift::NormalStream& rng) {
    JumpConfig cfg;
    cfg.theta = 0.5 + 1.5 * rng.next_uniform();
    cfg.t0 = 1.0;
    const int jumps = 1 + static_cast<int>(3.0 * rng.next_uniform() * 0.9999);
    double pos = 0.0;
    for (int j = 0; j < jumps; ++j) {
        pos += 0.08 + (0.8 / jumps - 0.08) * rng.next_uniform();
        cfg.jump_times.push_back(pos);
        double rho = 0.5 + 1.5 * rng.next_uniform();
        if (rng.next_uniform() < 0.5) rho = -rho;
        cfg.jump_heights.push_back(rho);
    }
    auto draw_h = [&rng]() {
        double h = 0.25 + 1.75 * rng.next_uniform();
        if (rng.next_uniform() < 0.5) h = -h;
        return h;
    };
    cfg.h1 = draw_h();
    cfg.h2 = draw_h();
    const double d = std::max(std::abs(cfg.h1), std::abs(cfg.h2));
    const long long n0 =
        peridrift::disjointness_threshold(cfg.theta, d, cfg.t0, cfg.jump_times);
    cfg.n = n0 + static_cast<long long>(10.0 * rng.next_uniform());
    return cfg;
}

inline peridrift::PiecewiseSignal to_signal(const JumpConfig& cfg) {
    peridrift::PiecewiseSignal sig;
    sig.jump_times = cfg.jump_times;
    sig.jump_heights = cfg.jump_heights;
    sig.continuous_part = [](double) { return 0.0; };
    sig.lipschitz_const = 0.0;
    return sig;
}

}  // namespace testsupport
