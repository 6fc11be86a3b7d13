#pragma once

// Run configuration: a small INI-style text format with nested sections for
// model, signal and experiment settings. Parsing and serialization are
// exact inverses on canonical text (serialize . parse = identity), which
// the manifest hash relies on.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "peridrift/catalog.hpp"
#include "peridrift/errors.hpp"
#include "peridrift/sde.hpp"

namespace peridrift {

struct RunConfig {
    std::string kind = "mc";  // simulate | lan | limit | bayes-mle | estimate | rates | mc
    std::uint64_t seed = 1;
    std::string out = "out";
    unsigned threads = 0;  // 0 = hardware
    double dt = 0.0;       // 0 = default policy

    std::string model_id = "wn";
    double x0 = 0.0;
    std::string signal_id = "sin";

    double theta = 1.0;
    std::vector<double> n_values;
    std::vector<double> h_values;
    int replicates = 100;
    std::vector<double> t_grid;

    // estimate / rates
    double search_lo = 0.0;  // 0,0 = default [theta/2, 3 theta/2]
    double search_hi = 0.0;
    double refine_tol = 0.0;  // 0 = 10 * local scale
    std::string input;        // external path CSV (estimate)

    // bayes-mle
    double j_constant = 1.0;
    double h_true = 0.0;
    double grid_lo = 0.0;  // all zero = default grid from J
    double grid_hi = 0.0;
    double grid_step = 0.0;

    std::map<std::string, double> thresholds;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    out << "kind = " << c.kind << '\n';
    out << "seed = " << c.seed << '\n';
    out << "out = " << c.out << '\n';
    out << "threads = " << c.threads << '\n';
    out << "dt = " << format_double(c.dt) << '\n';
    out << "\n[model]\n";
    out << "id = " << c.model_id << '\n';
    out << "x0 = " << format_double(c.x0) << '\n';
    out << "\n[signal]\n";
    out << "id = " << c.signal_id << '\n';
    out << "\n[experiment]\n";
    out << "theta = " << format_double(c.theta) << '\n';
    out << "n = " << detail::join_numbers(c.n_values) << '\n';
    out << "h = " << detail::join_numbers(c.h_values) << '\n';
    out << "replicates = " << c.replicates << '\n';
    out << "t_grid = " << detail::join_numbers(c.t_grid) << '\n';
    out << "search_lo = " << format_double(c.search_lo) << '\n';
    out << "search_hi = " << format_double(c.search_hi) << '\n';
    out << "refine_tol = " << format_double(c.refine_tol) << '\n';
    out << "input = " << c.input << '\n';
    out << "j = " << format_double(c.j_constant) << '\n';
    out << "h_true = " << format_double(c.h_true) << '\n';
    out << "grid_lo = " << format_double(c.grid_lo) << '\n';
    out << "grid_hi = " << format_double(c.grid_hi) << '\n';
    out << "grid_step = " << format_double(c.grid_step) << '\n';
    if (!c.thresholds.empty()) {
        out << "\n[thresholds]\n";
        for (const auto& [name, value] : c.thresholds)
            out << name << " = " << format_double(value) << '\n';
    }
    return out.str();
}

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    cfg.n_values.clear();
    cfg.h_values.clear();
    std::istringstream in(text);
    std::string line, section;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("bad section header: " + line);
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto num = [&]() {
            try {
                return std::stod(value);
            } catch (...) {
                throw ConfigError("bad number for " + key + ": " + value);
            }
        };
        auto numbers = [&]() { return catalog_parse_numbers(value); };
        try {
            if (section.empty()) {
                if (key == "kind") cfg.kind = value;
                else if (key == "seed") cfg.seed = std::stoull(value);
                else if (key == "out") cfg.out = value;
                else if (key == "threads") cfg.threads = static_cast<unsigned>(std::stoul(value));
                else if (key == "dt") cfg.dt = num();
                else throw ConfigError("unknown top-level key: " + key);
            } else if (section == "model") {
                if (key == "id") cfg.model_id = value;
                else if (key == "x0") cfg.x0 = num();
                else throw ConfigError("unknown [model] key: " + key);
            } else if (section == "signal") {
                if (key == "id") cfg.signal_id = value;
                else throw ConfigError("unknown [signal] key: " + key);
            } else if (section == "experiment") {
                if (key == "theta") cfg.theta = num();
                else if (key == "n") cfg.n_values = numbers();
                else if (key == "h") cfg.h_values = numbers();
                else if (key == "replicates") cfg.replicates = std::stoi(value);
                else if (key == "t_grid") cfg.t_grid = numbers();
                else if (key == "search_lo") cfg.search_lo = num();
                else if (key == "search_hi") cfg.search_hi = num();
                else if (key == "refine_tol") cfg.refine_tol = num();
                else if (key == "input") cfg.input = value;
                else if (key == "j") cfg.j_constant = num();
                else if (key == "h_true") cfg.h_true = num();
                else if (key == "grid_lo") cfg.grid_lo = num();
                else if (key == "grid_hi") cfg.grid_hi = num();
                else if (key == "grid_step") cfg.grid_step = num();
                else throw ConfigError("unknown [experiment] key: " + key);
            } else if (section == "thresholds") {
                cfg.thresholds[key] = num();
            } else {
                throw ConfigError("unknown section: " + section);
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("bad value for " + key + ": " + e.what());
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

// Validates catalog references and experiment-kind requirements before any
// simulation starts.
inline void validate_config(const RunConfig& c) {
    static const char* kinds[] = {"simulate", "lan", "limit", "bayes-mle",
                                  "estimate", "rates", "mc"};
    bool known = false;
    for (const char* k : kinds) known |= (c.kind == k);
    if (!known) throw ConfigError("unknown experiment kind: " + c.kind);
    (void)make_model(c.model_id, c.x0);
    const SignalSpec sig = make_signal(c.signal_id);
    if (!(c.theta > 0.0)) throw ConfigError("theta must be positive");
    if (c.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (c.kind != "bayes-mle" && c.n_values.empty() && c.input.empty())
        throw ConfigError("n values required for kind " + c.kind);
    for (double n : c.n_values)
        if (!(n > 0.0)) throw ConfigError("n values must be positive");
    if (c.kind == "lan" && !is_smooth(sig))
        throw ConfigError("lan requires a smooth signal");
    if (c.kind == "limit" && is_smooth(sig))
        throw ConfigError("limit requires a piecewise signal");
    if (c.kind == "rates" && c.n_values.size() < 4)
        throw ConfigError("rates needs at least 4 n values");
    if (c.kind == "bayes-mle" && !(c.j_constant > 0.0))
        throw ConfigError("bayes-mle needs J > 0");
    if (c.search_lo != 0.0 || c.search_hi != 0.0) {
        if (!(c.search_lo > 0.0) || !(c.search_hi > c.search_lo))
            throw ConfigError("bad search interval");
    }
}

// FNV-1a 64-bit over the canonical serialization; pins every output byte.
inline std::uint64_t config_hash(const RunConfig& c) {
    const std::string text = serialize_config(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace peridrift
