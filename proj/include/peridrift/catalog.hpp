#pragma once

// Named signal and model constructors, addressable from config files.
//
// Signals:   zero | sin | sin(a) | bump | box(r1,r2) | steps(r1,..;rho1,..;c)
//            where c is `none` or `sin:alpha` (Lipschitz part alpha*sin(2 pi t)).
// Models:    wn | wn(sigma) | ou | ou(kappa) | ou(kappa,sigma) | ousin | ousin(kappa)
//            ousin uses sigma(x) = (2 + sin x)/2, bounded in [1/2, 3/2].

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "peridrift/errors.hpp"
#include "peridrift/model.hpp"
#include "peridrift/signal.hpp"

namespace peridrift {

inline SmoothSignal make_sin_signal(double amplitude = 1.0) {
    constexpr double two_pi = 2.0 * M_PI;
    SmoothSignal s;
    s.s0 = [amplitude](double t) { return amplitude * std::sin(two_pi * t); };
    s.s0_prime = [amplitude](double t) { return amplitude * two_pi * std::cos(two_pi * t); };
    s.s0_second = [amplitude](double t) {
        return -amplitude * two_pi * two_pi * std::sin(two_pi * t);
    };
    s.bound = std::max(1.0, std::abs(amplitude)) * two_pi * two_pi;
    s.harmonic_amplitude = amplitude;
    return s;
}

inline SmoothSignal make_zero_signal() {
    SmoothSignal s;
    s.s0 = [](double) { return 0.0; };
    s.s0_prime = [](double) { return 0.0; };
    s.s0_second = [](double) { return 0.0; };
    s.bound = 1.0;
    s.harmonic_amplitude = 0.0;
    return s;
}

// C^2 compactly supported bump on [1/4, 3/4] of each period:
// S0(v) = g(4 pi (v - 1/2)) with g(x) = ((1 + cos x)/2)^2; g, g', g'' all
// vanish at the edges.
inline SmoothSignal make_bump_signal() {
    constexpr double four_pi = 4.0 * M_PI;
    auto arg = [](double t) { return four_pi * (frac(t) - 0.5); };
    auto inside = [](double x) { return x >= -M_PI && x <= M_PI; };
    SmoothSignal s;
    s.s0 = [arg, inside](double t) {
        const double x = arg(t);
        if (!inside(x)) return 0.0;
        const double c = 0.5 * (1.0 + std::cos(x));
        return c * c;
    };
    s.s0_prime = [arg, inside](double t) {
        const double x = arg(t);
        if (!inside(x)) return 0.0;
        return four_pi * (-0.5 * (1.0 + std::cos(x)) * std::sin(x));
    };
    s.s0_second = [arg, inside](double t) {
        const double x = arg(t);
        if (!inside(x)) return 0.0;
        return four_pi * four_pi * (-0.5 * (std::cos(x) + std::cos(2.0 * x)));
    };
    s.bound = four_pi * four_pi;  // dominates sup|S0''| = (4 pi)^2
    return s;
}

// The paper's worked example: indicator of (r1, r2] per period, i.e. jumps
// +1 at r1 and -1 at r2, no Lipschitz part.
inline PiecewiseSignal make_box_signal(double r1, double r2) {
    PiecewiseSignal s;
    s.jump_times = {r1, r2};
    s.jump_heights = {1.0, -1.0};
    s.continuous_part = [](double) { return 0.0; };
    s.lipschitz_const = 0.0;
    s.check();
    return s;
}

inline PiecewiseSignal make_steps_signal(std::vector<double> jump_times,
                                         std::vector<double> jump_heights,
                                         double sin_part_amplitude = 0.0) {
    PiecewiseSignal s;
    s.jump_times = std::move(jump_times);
    s.jump_heights = std::move(jump_heights);
    if (sin_part_amplitude == 0.0) {
        s.continuous_part = [](double) { return 0.0; };
        s.lipschitz_const = 0.0;
    } else {
        const double a = sin_part_amplitude;
        s.continuous_part = [a](double t) { return a * std::sin(2.0 * M_PI * t); };
        s.lipschitz_const = 2.0 * M_PI * std::abs(a);
    }
    s.check();
    return s;
}

inline ModelSpec make_white_noise_model(double sigma = 1.0, double x0 = 0.0) {
    if (!(sigma > 0.0)) throw std::invalid_argument("white noise model: sigma must be > 0");
    ModelSpec m;
    m.b = [](double) { return 0.0; };
    m.sigma = [sigma](double) { return sigma; };
    m.sigma_lower = sigma;
    m.sigma_upper = sigma;
    m.lipschitz_b = 0.0;
    m.lipschitz_sigma = 0.0;
    m.x0 = x0;
    return m;
}

inline ModelSpec make_ou_model(double kappa = 1.0, double sigma = 1.0, double x0 = 0.0) {
    if (!(kappa > 0.0) || !(sigma > 0.0))
        throw std::invalid_argument("ou model: kappa and sigma must be > 0");
    ModelSpec m;
    m.b = [kappa](double x) { return -kappa * x; };
    m.sigma = [sigma](double) { return sigma; };
    m.sigma_lower = sigma;
    m.sigma_upper = sigma;
    m.lipschitz_b = kappa;
    m.lipschitz_sigma = 0.0;
    m.x0 = x0;
    return m;
}

// OU drift with state-dependent sigma(x) = (2 + sin x)/2 in [1/2, 3/2].
inline ModelSpec make_ou_sin_sigma_model(double kappa = 1.0, double x0 = 0.0) {
    if (!(kappa > 0.0)) throw std::invalid_argument("ousin model: kappa must be > 0");
    ModelSpec m;
    m.b = [kappa](double x) { return -kappa * x; };
    m.sigma = [](double x) { return 0.5 * (2.0 + std::sin(x)); };
    m.sigma_lower = 0.5;
    m.sigma_upper = 1.5;
    m.lipschitz_b = kappa;
    m.lipschitz_sigma = 0.5;
    m.x0 = x0;
    return m;
}

namespace detail {

inline std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        out.push_back(v);
    }
    return out;
}

// Splits "name(args)" into name and the raw argument text.
inline bool split_call(const std::string& id, std::string& name, std::string& args) {
    const auto open = id.find('(');
    if (open == std::string::npos) {
        name = id;
        args.clear();
        return true;
    }
    if (id.back() != ')') return false;
    name = id.substr(0, open);
    args = id.substr(open + 1, id.size() - open - 2);
    return true;
}

}  // namespace detail

// Comma-separated number list, shared with the config parser.
inline std::vector<double> catalog_parse_numbers(const std::string& text) {
    return detail::parse_number_list(text);
}

inline SignalSpec make_signal(const std::string& id) {
    std::string name, args;
    if (!detail::split_call(id, name, args)) throw ConfigError("bad signal id: " + id);
    try {
        if (name == "zero") return make_zero_signal();
        if (name == "sin") return args.empty() ? make_sin_signal()
                                               : make_sin_signal(std::stod(args));
        if (name == "bump") return make_bump_signal();
        if (name == "box") {
            const auto v = detail::parse_number_list(args);
            if (v.size() != 2) throw ConfigError("box needs two jump times: " + id);
            return make_box_signal(v[0], v[1]);
        }
        if (name == "steps") {
            // steps(r1,r2,..;rho1,rho2,..;c) with c = none | sin:alpha
            std::vector<std::string> parts;
            std::string token;
            std::istringstream in(args);
            while (std::getline(in, token, ';')) parts.push_back(token);
            if (parts.size() < 2 || parts.size() > 3)
                throw ConfigError("steps needs jumps;heights[;cont]: " + id);
            double alpha = 0.0;
            if (parts.size() == 3 && parts[2] != "none" && !parts[2].empty()) {
                if (parts[2].rfind("sin:", 0) != 0)
                    throw ConfigError("steps continuous part must be none or sin:alpha: " + id);
                alpha = std::stod(parts[2].substr(4));
            }
            return make_steps_signal(detail::parse_number_list(parts[0]),
                                     detail::parse_number_list(parts[1]), alpha);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("bad signal id '" + id + "': " + e.what());
    }
    throw ConfigError("unknown signal id: " + id);
}

inline ModelSpec make_model(const std::string& id, double x0 = 0.0) {
    std::string name, args;
    if (!detail::split_call(id, name, args)) throw ConfigError("bad model id: " + id);
    try {
        const auto v = detail::parse_number_list(args);
        if (name == "wn") {
            if (v.size() > 1) throw ConfigError("wn takes at most one parameter: " + id);
            return make_white_noise_model(v.empty() ? 1.0 : v[0], x0);
        }
        if (name == "ou") {
            if (v.size() > 2) throw ConfigError("ou takes at most two parameters: " + id);
            return make_ou_model(v.empty() ? 1.0 : v[0], v.size() > 1 ? v[1] : 1.0, x0);
        }
        if (name == "ousin") {
            if (v.size() > 1) throw ConfigError("ousin takes at most one parameter: " + id);
            return make_ou_sin_sigma_model(v.empty() ? 1.0 : v[0], x0);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("bad model id '" + id + "': " + e.what());
    }
    throw ConfigError("unknown model id: " + id);
}

}  // namespace peridrift
