#pragma once

// Experiment orchestration: the likelihood-scan estimator for theta, rate
// regressions over n, the lightweight Monte Carlo summary, and the
// config-driven `run` entry point that writes CSV artifacts, a JSON
// summary, and a manifest.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "peridrift/config.hpp"
#include "peridrift/lan.hpp"
#include "peridrift/likelihood.hpp"
#include "peridrift/limitexp.hpp"
#include "peridrift/parallel.hpp"
#include "peridrift/runner_scan.hpp"
#include "peridrift/stats.hpp"

namespace peridrift {

struct RateRow {
    double n = 0.0;
    std::vector<EstimatorResult> results;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double discard_fraction = 0.0;
    int aborts = 0;
};

struct RateReport {
    std::vector<RateRow> rows;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
    int total_aborts = 0;
};

namespace detail {

inline double default_refine_tol(bool smooth, double n) {
    return 10.0 * (smooth ? std::pow(n, -1.5) : 1.0 / (n * n));
}

inline SearchInterval search_interval_for(const RunConfig& cfg) {
    if (cfg.search_lo != 0.0 || cfg.search_hi != 0.0) return {cfg.search_lo, cfg.search_hi};
    return {0.5 * cfg.theta, 1.5 * cfg.theta};
}

}  // namespace detail

// Estimates theta on M simulated replicates per n and regresses log RMSE on
// log n; boundary-warned replicates are discarded from the RMSE (the
// discard fraction is reported), and the slope confidence interval comes
// from a seeded bootstrap over replicates within each n.
inline RateReport rate_experiment(const RunConfig& cfg) {
    validate_config(cfg);
    const ModelSpec model = make_model(cfg.model_id, cfg.x0);
    const SignalSpec signal = make_signal(cfg.signal_id);
    const bool smooth = is_smooth(signal);
    const SearchInterval search = detail::search_interval_for(cfg);

    RateReport report;
    for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
        const double n = cfg.n_values[ni];
        const double tol =
            cfg.refine_tol > 0.0 ? cfg.refine_tol : detail::default_refine_tol(smooth, n);
        RateRow row;
        row.n = n;
        row.results.assign(static_cast<std::size_t>(cfg.replicates), {});
        std::vector<std::uint8_t> ok(cfg.replicates, 0);
        parallel_for(static_cast<std::size_t>(cfg.replicates), cfg.threads,
                     [&](std::size_t rep) {
                         SimConfig sim;
                         sim.horizon = n;
                         sim.dt_base = cfg.dt;
                         sim.seed = cfg.seed;
                         sim.stream = substream(ni + 48, rep);
                         try {
                             const Path path = simulate(model, signal, cfg.theta, sim);
                             row.results[rep] =
                                 estimate_theta(path, model, signal, search, tol);
                             row.results[rep].replicate = static_cast<int>(rep);
                             ok[rep] = 1;
                         } catch (const SimulationDiverged&) {
                         }
                     });
        std::vector<double> sq_errors;
        int discarded = 0;
        for (int rep = 0; rep < cfg.replicates; ++rep) {
            if (!ok[rep]) {
                ++row.aborts;
                continue;
            }
            if (row.results[rep].boundary_warning) {
                ++discarded;
                continue;
            }
            const double e = row.results[rep].theta_hat - cfg.theta;
            sq_errors.push_back(e * e);
        }
        report.total_aborts += row.aborts;
        row.discard_fraction =
            static_cast<double>(discarded) / static_cast<double>(cfg.replicates);
        if (!sq_errors.empty()) {
            row.rmse = std::sqrt(stats::mean(sq_errors));
        }
        report.rows.push_back(std::move(row));
    }
    if (report.total_aborts > static_cast<int>(0.01 * cfg.replicates *
                                               static_cast<double>(cfg.n_values.size())))
        throw RunAbortError("rate_experiment: more than 1% of replicates aborted");

    // slope of log RMSE vs log n over usable rows
    std::vector<double> log_n, log_rmse;
    std::vector<const RateRow*> usable;
    for (const auto& row : report.rows) {
        if (std::isfinite(row.rmse) && row.rmse > 0.0) {
            log_n.push_back(std::log(row.n));
            log_rmse.push_back(std::log(row.rmse));
            usable.push_back(&row);
        }
    }
    if (log_n.size() >= 2) {
        const auto fit = stats::ols_fit(log_n, log_rmse);
        report.slope = fit.slope;
        report.intercept = fit.intercept;

        // bootstrap over replicates within each n (1000 resamples)
        const int boot = 1000;
        std::vector<double> slopes;
        slopes.reserve(boot);
        for (int b = 0; b < boot; ++b) {
            NormalStream rng(cfg.seed, substream(0xB007, static_cast<std::uint64_t>(b)));
            std::vector<double> lx, ly;
            for (const RateRow* row : usable) {
                std::vector<double> sq;
                for (const auto& res : row->results)
                    if (!res.boundary_warning && res.theta_hat != 0.0) {
                        const double e = res.theta_hat - cfg.theta;
                        sq.push_back(e * e);
                    }
                if (sq.empty()) continue;
                double acc = 0.0;
                for (std::size_t i = 0; i < sq.size(); ++i) {
                    const std::size_t pick = std::min<std::size_t>(
                        sq.size() - 1,
                        static_cast<std::size_t>(rng.next_uniform() * sq.size()));
                    acc += sq[pick];
                }
                const double rmse_b = std::sqrt(acc / static_cast<double>(sq.size()));
                if (rmse_b > 0.0) {
                    lx.push_back(std::log(row->n));
                    ly.push_back(std::log(rmse_b));
                }
            }
            if (lx.size() >= 2) slopes.push_back(stats::ols_fit(lx, ly).slope);
        }
        if (!slopes.empty()) {
            report.ci_lo = stats::quantile(slopes, 0.025);
            report.ci_hi = stats::quantile(slopes, 0.975);
        }
    }
    return report;
}

// Per-replicate summary statistics for quick smoke runs: terminal local
// log-likelihoods, plus score and Fisher estimates for smooth signals.
struct McSummary {
    int replicates = 0;
    int aborted = 0;
    std::vector<double> n_values;
    std::vector<std::string> stat_names;
    // [ni][stat] -> mean / variance / quartiles over replicates
    std::vector<std::vector<double>> mean, var, q25, q50, q75;
    double residual_slope = std::numeric_limits<double>::quiet_NaN();
};

inline McSummary mc_experiment(const RunConfig& cfg) {
    validate_config(cfg);
    const ModelSpec model = make_model(cfg.model_id, cfg.x0);
    const SignalSpec signal = make_signal(cfg.signal_id);
    const bool smooth = is_smooth(signal);
    std::vector<double> h_values = cfg.h_values.empty() ? std::vector<double>{1.0}
                                                        : cfg.h_values;

    McSummary summary;
    summary.replicates = cfg.replicates;
    summary.n_values = cfg.n_values;
    if (smooth) {
        summary.stat_names = {"score", "fisher"};
        for (double h : h_values) {
            summary.stat_names.push_back("loglik(h=" + format_double(h) + ")");
            summary.stat_names.push_back("residual(h=" + format_double(h) + ")");
        }
    } else {
        for (double h : h_values)
            summary.stat_names.push_back("loglik(h=" + format_double(h) + ")");
    }
    const std::size_t nstats = summary.stat_names.size();

    std::vector<double> med_abs_residual;
    for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
        const double n = cfg.n_values[ni];
        std::vector<std::vector<double>> values(nstats);
        for (auto& v : values) v.assign(cfg.replicates, 0.0);
        std::vector<std::uint8_t> ok(cfg.replicates, 0);
        parallel_for(static_cast<std::size_t>(cfg.replicates), cfg.threads,
                     [&](std::size_t rep) {
                         SimConfig sim;
                         sim.horizon = n;
                         sim.dt_base = cfg.dt;
                         sim.seed = cfg.seed;
                         sim.stream = substream(ni + 96, rep);
                         if (!smooth)
                             sim.refine_points = local_refine_points(
                                 std::get<PiecewiseSignal>(signal), cfg.theta, h_values, n, n);
                         try {
                             const Path path = simulate(model, signal, cfg.theta, sim);
                             const auto exp = run_local_experiment(
                                 path, model, signal, cfg.theta, n, h_values,
                                 smooth ? LocalRate::kSmooth : LocalRate::kJump);
                             std::size_t s = 0;
                             if (smooth) {
                                 values[s++][rep] = *exp.score;
                                 values[s++][rep] = *exp.fisher;
                                 for (std::size_t hi = 0; hi < h_values.size(); ++hi) {
                                     values[s++][rep] = exp.loglik[hi];
                                     values[s++][rep] = exp.residuals[hi];
                                 }
                             } else {
                                 for (std::size_t hi = 0; hi < h_values.size(); ++hi)
                                     values[s++][rep] = exp.loglik[hi];
                             }
                             ok[rep] = 1;
                         } catch (const SimulationDiverged&) {
                         } catch (const GridAlignmentError&) {
                         }
                     });
        summary.mean.emplace_back();
        summary.var.emplace_back();
        summary.q25.emplace_back();
        summary.q50.emplace_back();
        summary.q75.emplace_back();
        std::vector<double> abs_res_first_h;
        for (std::size_t s = 0; s < nstats; ++s) {
            std::vector<double> used;
            for (int rep = 0; rep < cfg.replicates; ++rep)
                if (ok[rep]) used.push_back(values[s][rep]);
            if (s == 0 && static_cast<int>(used.size()) < cfg.replicates)
                summary.aborted += cfg.replicates - static_cast<int>(used.size());
            if (used.empty()) used.push_back(0.0);
            summary.mean.back().push_back(stats::mean(used));
            summary.var.back().push_back(used.size() > 1 ? stats::variance(used) : 0.0);
            summary.q25.back().push_back(stats::quantile(used, 0.25));
            summary.q50.back().push_back(stats::quantile(used, 0.50));
            summary.q75.back().push_back(stats::quantile(used, 0.75));
            if (smooth && summary.stat_names[s].rfind("residual", 0) == 0 &&
                abs_res_first_h.empty()) {
                for (double v : used) abs_res_first_h.push_back(std::abs(v));
            }
        }
        if (!abs_res_first_h.empty())
            med_abs_residual.push_back(stats::median(abs_res_first_h));
    }
    if (med_abs_residual.size() >= 2) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < med_abs_residual.size(); ++i) {
            if (med_abs_residual[i] > 0.0) {
                lx.push_back(std::log(cfg.n_values[i]));
                ly.push_back(std::log(med_abs_residual[i]));
            }
        }
        if (lx.size() >= 2) summary.residual_slope = stats::ols_fit(lx, ly).slope;
    }
    return summary;
}

// ---- artifacts ----------------------------------------------------------

inline constexpr const char* kVersion = "0.1.0";

struct Violation {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
};

struct RunResult {
    int exit_code = 0;
    std::vector<Violation> violations;
    std::vector<std::string> artifacts;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
}

// Statistics are checked as upper bounds: stat <= threshold passes.
inline void apply_thresholds(const RunConfig& cfg,
                             const std::map<std::string, double>& statistics,
                             RunResult& result, nlohmann::json& summary) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& [name, threshold] : cfg.thresholds) {
        const auto it = statistics.find(name);
        if (it == statistics.end())
            throw ConfigError("threshold references unknown statistic: " + name);
        const bool pass = it->second <= threshold;
        checks.push_back({{"name", name},
                          {"value", it->second},
                          {"threshold", threshold},
                          {"pass", pass}});
        if (!pass) result.violations.push_back({name, it->second, threshold});
    }
    summary["checks"] = checks;
    nlohmann::json stats_json;
    for (const auto& [name, value] : statistics) stats_json[name] = value;
    summary["statistics"] = stats_json;
}

}  // namespace detail

// Dispatches a validated config, writes deterministic artifacts into
// cfg.out (CSV data, summary.json, manifest.json) and returns the exit
// status; rerunning with the same config overwrites the same bytes.
inline RunResult run(const RunConfig& cfg) {
    validate_config(cfg);
    const ModelSpec model = make_model(cfg.model_id, cfg.x0);
    const SignalSpec signal = make_signal(cfg.signal_id);
    const std::filesystem::path out_dir(cfg.out);
    std::filesystem::create_directories(out_dir);

    RunResult result;
    nlohmann::json summary;
    summary["kind"] = cfg.kind;
    summary["seed"] = cfg.seed;
    std::map<std::string, double> statistics;

    if (cfg.kind == "simulate") {
        SimConfig sim;
        sim.horizon = cfg.n_values.front();
        sim.dt_base = cfg.dt;
        sim.seed = cfg.seed;
        Path path = simulate(model, signal, cfg.theta, sim);
        path.model_id = cfg.model_id;
        path.signal_id = cfg.signal_id;
        write_path_csv(path, (out_dir / "path.csv").string(),
                       (out_dir / "path.meta.json").string());
        result.artifacts = {"path.csv", "path.meta.json"};
        statistics["steps"] = static_cast<double>(path.steps());
    } else if (cfg.kind == "lan") {
        const auto& smooth = std::get<SmoothSignal>(signal);
        const auto report =
            run_lan_experiment(model, smooth, cfg.theta, cfg.n_values,
                               cfg.h_values.empty() ? std::vector<double>{-1.0, 0.0, 1.0}
                                                    : cfg.h_values,
                               cfg.replicates, cfg.seed, cfg.threads, cfg.dt);
        std::string csv = "n,stat,h,value\n";
        for (std::size_t ni = 0; ni < report.n_values.size(); ++ni) {
            const std::string n_str = format_double(report.n_values[ni]);
            csv += n_str + ",score_mean,," + format_double(report.score_mean[ni]) + "\n";
            csv += n_str + ",score_var,," + format_double(report.score_var[ni]) + "\n";
            csv += n_str + ",fisher_mean,," + format_double(report.fisher_mean[ni]) + "\n";
            csv += n_str + ",ks,," + format_double(report.ks_statistic[ni]) + "\n";
            for (std::size_t hi = 0; hi < report.h_values.size(); ++hi) {
                const std::string h_str = format_double(report.h_values[hi]);
                csv += n_str + ",residual_median," + h_str + "," +
                       format_double(report.residual_median[ni][hi]) + "\n";
                csv += n_str + ",remainder_u_median," + h_str + "," +
                       format_double(report.remainder_u_median[ni][hi]) + "\n";
                csv += n_str + ",remainder_v_median," + h_str + "," +
                       format_double(report.remainder_v_median[ni][hi]) + "\n";
            }
        }
        detail::write_text_file(out_dir / "lan.csv", csv);
        result.artifacts = {"lan.csv"};

        const std::size_t last = report.n_values.size() - 1;
        double ks_max = 0.0;
        for (double k : report.ks_statistic) ks_max = std::max(ks_max, k);
        statistics["ks_max"] = ks_max;
        statistics["ks_critical_1pct"] = 1.63 / std::sqrt(report.replicates);
        statistics["score_fisher_rel_dev"] =
            std::abs(report.score_var[last] / report.fisher_mean[last] - 1.0);
        double trend = -std::numeric_limits<double>::infinity();
        double res_final = 0.0;
        for (std::size_t hi = 0; hi < report.h_values.size(); ++hi) {
            if (report.h_values[hi] == 0.0) continue;
            trend = std::max(trend, report.residual_median[last][hi] -
                                        report.residual_median[0][hi]);
            res_final = std::max(res_final, report.residual_median[last][hi]);
        }
        statistics["residual_trend_violation"] = std::isfinite(trend) ? trend : 0.0;
        statistics["residual_median_final"] = res_final;
        statistics["abort_fraction"] =
            static_cast<double>(report.aborted) /
            (static_cast<double>(report.replicates) *
             static_cast<double>(report.n_values.size()));
        summary["fisher_mean_final"] = report.fisher_mean[last];
        summary["score_var_final"] = report.score_var[last];
    } else if (cfg.kind == "limit") {
        const auto& pw = std::get<PiecewiseSignal>(signal);
        const HSet hset(cfg.h_values.empty() ? std::vector<double>{-1.0, 1.0} : cfg.h_values);
        const auto report = fd_convergence_check(model, pw, cfg.theta, cfg.n_values, hset,
                                                 cfg.replicates, cfg.seed, cfg.threads, cfg.dt);
        std::string csv = "n,stat,h1,h2,value,target,dev\n";
        for (const auto& row : report.per_n) {
            const std::string n_str = format_double(row.n);
            for (std::size_t hi = 0; hi < hset.size(); ++hi) {
                const double h = hset.values[hi];
                const double target = -0.5 * std::abs(h) * report.j_hat;
                csv += n_str + ",mean_loglik," + format_double(h) + ",," +
                       format_double(row.mean_loglik[hi]) + "," + format_double(target) + "," +
                       format_double(row.mean_rel_dev[hi]) + "\n";
            }
            const auto target_cov = covariance_matrix(hset);
            for (std::size_t i = 0; i < hset.size(); ++i)
                for (std::size_t j = i; j < hset.size(); ++j) {
                    const double target = report.j_hat * target_cov[i * hset.size() + j];
                    const double value = row.cov[i * hset.size() + j];
                    csv += n_str + ",cov," + format_double(hset.values[i]) + "," +
                           format_double(hset.values[j]) + "," + format_double(value) + "," +
                           format_double(target) + "," + format_double(value - target) + "\n";
                }
        }
        detail::write_text_file(out_dir / "limit.csv", csv);
        result.artifacts = {"limit.csv"};
        const auto& last = report.per_n.back();
        statistics["max_rel_mean_dev_final"] = last.max_rel_mean_dev;
        statistics["cross_cov_sigmas_final"] =
            last.max_cross_cov_se > 0.0 ? last.max_cross_cov_abs / last.max_cross_cov_se : 0.0;
        statistics["mean_dev_trend_violation"] =
            last.max_rel_mean_dev - report.per_n.front().max_rel_mean_dev;
        statistics["abort_fraction"] =
            static_cast<double>(report.aborted) /
            (static_cast<double>(report.replicates) *
             static_cast<double>(report.per_n.size()));
        summary["j_hat"] = report.j_hat;
    } else if (cfg.kind == "bayes-mle") {
        EstimatorGrid grid = default_bayes_mle_grid(cfg.j_constant);
        if (cfg.grid_step != 0.0) grid = {cfg.grid_lo, cfg.grid_hi, cfg.grid_step};
        const auto report = mle_vs_bayes(cfg.j_constant, cfg.h_true, grid, cfg.replicates,
                                         cfg.seed, cfg.threads);
        std::string csv = "estimator,mse,stderr\n";
        csv += "mle," + format_double(report.mle_mse) + "," + format_double(report.mle_se) +
               "\n";
        csv += "bayes," + format_double(report.bayes_mse) + "," +
               format_double(report.bayes_se) + "\n";
        detail::write_text_file(out_dir / "bayes_mle.csv", csv);
        result.artifacts = {"bayes_mle.csv"};
        statistics["mse_ratio"] = report.mse_ratio;
        statistics["boundary_fraction"] =
            static_cast<double>(report.boundary_hits) / cfg.replicates;
        summary["mle_mse"] = report.mle_mse;
        summary["bayes_mse"] = report.bayes_mse;
        summary["pooled_se"] = report.pooled_se;
        summary["margin_sigmas"] =
            (report.mle_mse - report.bayes_mse) / report.pooled_se;
    } else if (cfg.kind == "estimate" || cfg.kind == "rates") {
        if (cfg.kind == "estimate" && !cfg.input.empty()) {
            if (cfg.search_lo == 0.0 && cfg.search_hi == 0.0)
                throw ConfigError("estimate on an external path needs explicit search bounds");
            const Path path = read_path_csv(cfg.input);
            const bool smooth = is_smooth(signal);
            const double tol = cfg.refine_tol > 0.0
                                   ? cfg.refine_tol
                                   : detail::default_refine_tol(smooth, path.horizon());
            const auto est = estimate_theta(path, model, signal,
                                            detail::search_interval_for(cfg), tol);
            std::string csv = "n,replicate,theta_hat,boundary\n";
            csv += format_double(path.horizon()) + ",0," + format_double(est.theta_hat) +
                   "," + (est.boundary_warning ? "1" : "0") + "\n";
            detail::write_text_file(out_dir / "estimates.csv", csv);
            result.artifacts = {"estimates.csv"};
            summary["theta_hat"] = est.theta_hat;
            statistics["boundary"] = est.boundary_warning ? 1.0 : 0.0;
        } else {
            const auto report = rate_experiment(cfg);
            std::string csv = "n,replicate,theta_hat,boundary\n";
            for (const auto& row : report.rows)
                for (const auto& res : row.results)
                    csv += format_double(row.n) + "," + std::to_string(res.replicate) + "," +
                           format_double(res.theta_hat) + "," +
                           (res.boundary_warning ? "1" : "0") + "\n";
            detail::write_text_file(out_dir / "estimates.csv", csv);
            std::string rates_csv = "n,rmse,discard_fraction\n";
            for (const auto& row : report.rows)
                rates_csv += format_double(row.n) + "," + format_double(row.rmse) + "," +
                             format_double(row.discard_fraction) + "\n";
            detail::write_text_file(out_dir / "rates.csv", rates_csv);
            result.artifacts = {"estimates.csv", "rates.csv"};
            statistics["slope"] = report.slope;
            statistics["slope_ci_hi"] = report.ci_hi;
            statistics["abort_fraction"] =
                static_cast<double>(report.total_aborts) /
                (static_cast<double>(cfg.replicates) *
                 static_cast<double>(cfg.n_values.size()));
            double max_discard = 0.0;
            for (const auto& row : report.rows)
                max_discard = std::max(max_discard, row.discard_fraction);
            statistics["discard_fraction_max"] = max_discard;
            summary["slope"] = report.slope;
            summary["slope_ci"] = {report.ci_lo, report.ci_hi};
        }
    } else if (cfg.kind == "mc") {
        const auto report = mc_experiment(cfg);
        std::string csv = "n,stat,mean,var,q25,q50,q75\n";
        for (std::size_t ni = 0; ni < report.n_values.size(); ++ni)
            for (std::size_t s = 0; s < report.stat_names.size(); ++s)
                csv += format_double(report.n_values[ni]) + "," + report.stat_names[s] + "," +
                       format_double(report.mean[ni][s]) + "," +
                       format_double(report.var[ni][s]) + "," +
                       format_double(report.q25[ni][s]) + "," +
                       format_double(report.q50[ni][s]) + "," +
                       format_double(report.q75[ni][s]) + "\n";
        detail::write_text_file(out_dir / "mc.csv", csv);
        result.artifacts = {"mc.csv"};
        statistics["abort_fraction"] =
            static_cast<double>(report.aborted) /
            (static_cast<double>(report.replicates) *
             static_cast<double>(report.n_values.size()));
        if (std::isfinite(report.residual_slope))
            summary["residual_slope"] = report.residual_slope;
    }

    detail::apply_thresholds(cfg, statistics, result, summary);
    detail::write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    result.artifacts.push_back("summary.json");

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["kind"] = cfg.kind;
    manifest["seed"] = cfg.seed;
    char hash_hex[20];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    manifest["config_hash"] = hash_hex;
    manifest["artifacts"] = result.artifacts;
    manifest["violations"] = result.violations.size();
    detail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    result.artifacts.push_back("manifest.json");

    result.exit_code = result.violations.empty() ? 0 : 1;
    return result;
}

}  // namespace peridrift
