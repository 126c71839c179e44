#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ebip/config.hpp"
#include "ebip/contraction.hpp"
#include "ebip/empirical_bayes.hpp"
#include "ebip/instance.hpp"
#include "ebip/posterior.hpp"
#include "ebip/report.hpp"

namespace ebip::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitVerdictFail = 1;
inline constexpr int kExitError = 2;

/// Values given on the command line; they override the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

inline Json load_config_json(const std::string& path) {
    if (path.empty()) {
        return Json::object();
    }
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void apply(GlobalOptions& g, const Overrides& o) {
    if (o.seed) {
        g.seed = *o.seed;
    }
    if (o.out) {
        g.out = *o.out;
    }
    if (o.threads) {
        require(*o.threads >= 0, "--threads must be >= 0");
        g.threads = *o.threads;
    }
}

inline int resolved_threads(int threads) {
    return threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : threads;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Json environment_stamp(int threads_used) {
    return Json{{"compiler", __VERSION__},
                {"cxx_standard", static_cast<long>(__cplusplus)},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"threads_used", threads_used}};
}

/// Summary skeleton; "generated_at" is the only field that varies between identical runs.
inline Json summary_header(const std::string& command, const Json& effective, int threads_used) {
    return Json{{"command", command},
                {"generated_at", utc_timestamp()},
                {"effective_config", effective},
                {"environment", environment_stamp(threads_used)}};
}

inline std::filesystem::path out_path(const GlobalOptions& g, const std::string& name) {
    return std::filesystem::path(g.out) / name;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline std::string verdict_word(bool ok) { return ok ? "PASS" : "FAIL"; }

// ---------------------------------------------------------------------------

inline int cmd_simulate(const Json& raw, const Overrides& ov, std::ostream& log) {
    SimulateConfig c = simulate_config_from_json(raw);
    apply(c.global, ov);
    const ProblemInstance instance = build_instance(c.instance, c.truth.gamma);
    const SpectralVector truth = make_truth(c.truth.family, c.truth.gamma, instance.spectrum().p(),
                                            instance.spectrum().d(), instance.size(), c.truth.seed);
    const DataRealization data = simulate_data(instance, truth, c.n, c.global.seed);
    const auto path = out_path(c.global, "data.json");
    write_json(path, to_json(data));
    log << "noise level n^{-1/2} = " << format_double(1.0 / std::sqrt(c.n)) << "\n";
    log << "||T u_truth|| = " << format_double(instance.forward().apply(truth.values()).norm()) << "\n";
    log << "wrote " << path.string() << "\n";
    return kExitPass;
}

inline Json to_json(const EBEstimate& e, const EBConfig& cfg, int truncation) {
    return Json{{"n", e.n},
                {"truncation", truncation},
                {"alpha_tilde_raw", e.alpha_tilde_raw},
                {"alpha_tilde_hat", e.alpha_tilde_hat},
                {"alpha_hat", e.alpha_hat},
                {"eb", to_json(cfg)}};
}

inline int cmd_estimate_alpha(const Json& raw, const Overrides& ov, std::ostream& log) {
    EstimateConfig c = estimate_config_from_json(raw);
    apply(c.global, ov);
    const ProblemInstance instance = build_instance(c.instance, c.truth.gamma);
    std::optional<DataRealization> data;
    if (!c.data_file.empty()) {
        Json dj;
        try {
            dj = Json::parse(read_text_file(c.data_file));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(c.data_file + ": " + e.what());
        }
        data = data_from_json(dj);
    } else {
        const SpectralVector truth = make_truth(c.truth.family, c.truth.gamma, instance.spectrum().p(),
                                                instance.spectrum().d(), instance.size(), c.truth.seed);
        data = simulate_data(instance, truth, c.n, c.global.seed);
    }
    require(data->d.size() == instance.size(), "estimate-alpha: data length differs from instance size");
    const EBEstimate est = estimate_alpha(data->d, data->n, instance, c.eb);
    const Json j = to_json(est, c.eb, instance.size());
    log << j.dump(2) << "\n";
    write_json(out_path(c.global, "estimate.json"), j);
    if (c.write_curve) {
        write_text_file(out_path(c.global, "likelihood.csv"), curve_to_csv(est.curve));
    }
    return kExitPass;
}

inline int cmd_contract(const Json& raw, const Overrides& ov, std::ostream& log) {
    ContractConfig c = contract_config_from_json(raw);
    apply(c.global, ov);
    ExperimentPlan plan = c.plan;
    plan.master_seed = c.global.seed;
    plan.threads = c.global.threads;
    const ContractionRun run = run_contraction(plan);
    const ProblemInstance instance = build_instance(plan.instance, plan.truth.gamma);

    std::vector<RateFit> fits;
    bool ok = true;
    for (const auto& f : c.fits) {
        const ErrorField field = f.field == "err_m" ? ErrorField::ErrM : ErrorField::ErrU;
        const double target =
            f.target ? *f.target : (field == ErrorField::ErrM ? target_exponent_m(instance) : target_exponent_u(instance));
        fits.push_back(fit_rate(run.records, field, target, f.tolerance));
        ok = ok && fits.back().verdict;
    }

    Json summary = summary_header("contract", to_json(c), resolved_threads(plan.threads));
    summary["truncation"] = run.truncation;
    summary["truncation_floor"] = truncation_floor(plan);
    summary["rows"] = run.records.size();
    Json per_n = Json::array();
    const auto su = summarize(run.records, ErrorField::ErrU);
    const auto sm = summarize(run.records, ErrorField::ErrM);
    for (std::size_t k = 0; k < su.size(); ++k) {
        std::vector<double> tail;
        std::vector<double> sieve;
        std::vector<double> alphas;
        const ContractionDiagnostics* diag = nullptr;
        for (std::size_t r = 0; r < run.records.size(); ++r) {
            if (run.records[r].n == su[k].n) {
                tail.push_back(run.records[r].tail_mass);
                sieve.push_back(run.diagnostics[r].sieve_fraction);
                alphas.push_back(run.records[r].alpha_hat);
                diag = &run.diagnostics[r];
            }
        }
        per_n.push_back(Json{{"n", su[k].n},
                             {"mean_err_u", su[k].mean},
                             {"median_err_u", su[k].median},
                             {"mean_err_m", sm[k].mean},
                             {"median_err_m", sm[k].median},
                             {"median_alpha_hat", median_of(alphas)},
                             {"median_tail_mass", median_of(tail)},
                             {"eps_n", diag->eps_n},
                             {"m_n", diag->m_n},
                             {"median_sieve_fraction", median_of(sieve)},
                             {"k_n", diag->k_n},
                             {"rho_n", diag->rho_n}});
    }
    summary["per_n"] = per_n;
    Json fj = Json::array();
    for (const auto& f : fits) {
        fj.push_back(to_json(f));
    }
    summary["fits"] = fj;
    summary["verdict"] = ok;

    export_results(run.records, out_path(c.global, "records.csv"));
    write_json(out_path(c.global, "summary.json"), summary);
    render_report(run.records, fits, run.diagnostics, out_path(c.global, "report.svg"));
    for (const auto& f : fits) {
        log << f.field << ": slope " << format_double(f.slope) << " target " << format_double(f.target_exponent)
            << " +- " << format_double(f.tolerance) << " -> " << verdict_word(f.verdict) << "\n";
    }
    log << "wrote " << c.global.out << "/{records.csv,summary.json,report.svg}\n";
    return ok ? kExitPass : kExitVerdictFail;
}

inline Json to_json(const AssumptionLevel& level) {
    Json ratios = Json::array();
    for (const auto& r : level.ratios) {
        ratios.push_back(Json{{"r", r.r}, {"min_ratio", r.min_ratio}, {"max_ratio", r.max_ratio}});
    }
    Json norms = Json::array();
    for (const auto& n : level.norms) {
        norms.push_back(Json{{"alpha", n.alpha},
                             {"statement3", n.statement3},
                             {"statement4", n.statement4},
                             {"statement5", n.statement5},
                             {"statement6", n.statement6},
                             {"statement7", n.statement7},
                             {"converged", n.converged}});
    }
    return Json{{"N", level.size}, {"ratios", ratios}, {"norms", norms}};
}

inline int cmd_verify(const Json& raw, const Overrides& ov, std::ostream& log) {
    VerifyConfig c = verify_config_from_json(raw);
    apply(c.global, ov);
    const ProblemInstance coarse = build_instance(c.instance);
    const ProblemInstance fine = build_instance(refined(c.instance));
    const AssumptionReport rep =
        verify_assumptions(coarse, fine, c.alpha_grid, c.r_grid, c.probes, c.global.seed, c.band);
    Json summary = summary_header("verify-assumptions", to_json(c), 1);
    summary["band"] = rep.band;
    summary["coarse"] = to_json(rep.coarse);
    summary["fine"] = to_json(rep.fine);
    summary["hs_defect"] = Json::array();
    for (double a : c.alpha_grid) {
        summary["hs_defect"].push_back(Json{{"alpha", a}, {"coarse", hs_defect(coarse, a)}, {"fine", hs_defect(fine, a)}});
    }
    summary["verdict"] = rep.consistent ? "consistent" : "inconsistent";
    write_json(out_path(c.global, "assumptions.json"), summary);
    for (const auto& r : rep.fine.ratios) {
        log << "statement 2, r = " << format_double(r.r) << ": ratios in [" << format_double(r.min_ratio) << ", "
            << format_double(r.max_ratio) << "] at N = " << rep.fine.size << "\n";
    }
    log << "verdict: " << (rep.consistent ? "consistent" : "inconsistent") << " (band " << format_double(rep.band)
        << ")\n";
    return rep.consistent ? kExitPass : kExitVerdictFail;
}

inline int cmd_prior_mass(const Json& raw, const Overrides& ov, std::ostream& log) {
    PriorMassConfig c = prior_mass_config_from_json(raw);
    apply(c.global, ov);
    const double fraction = prior_self_similar_mass(c.alpha, c.self_similar, c.samples, c.N, c.global.seed);
    const bool ok = fraction >= c.threshold;
    const auto& s = c.self_similar;
    Json summary = summary_header("prior-mass", to_json(c), 1);
    summary["fraction"] = fraction;
    summary["constraint_rho_minus_1"] = s.rho - 1.0;
    summary["constraint_eps_R_rho_pow"] = s.epsilon * s.ball.radius * std::pow(s.rho, 1.0 + 2.0 * s.ball.beta);
    summary["verdict"] = ok;
    write_json(out_path(c.global, "prior_mass.json"), summary);
    log << "certified fraction " << format_double(fraction) << " (threshold " << format_double(c.threshold)
        << ") -> " << verdict_word(ok) << "\n";
    return ok ? kExitPass : kExitVerdictFail;
}

inline int cmd_kl_check(const Json& raw, const Overrides& ov, std::ostream& log) {
    KLConfig c = kl_config_from_json(raw);
    apply(c.global, ov);
    const ProblemInstance instance = build_instance(c.instance, c.truth.gamma);
    const SpectralVector truth = make_truth(c.truth.family, c.truth.gamma, instance.spectrum().p(),
                                            instance.spectrum().d(), instance.size(), c.truth.seed);
    RandomStream rng(stream_key(c.global.seed, "kl-perturbation"));
    Eigen::VectorXd u = truth.values();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u(i) += c.perturbation * rng.normal() / static_cast<double>(i + 1);
    }
    const KLReport rep = kl_ball_check(instance, SpectralVector(u), truth, c.n, c.mc, c.global.seed);
    const bool ok = std::abs(rep.z_mean) <= c.z_mean_max && std::abs(rep.z_var) <= c.z_var_max;
    Json summary = summary_header("kl-check", to_json(c), 1);
    summary["kl_mean"] = rep.kl_mean;
    summary["kl_var"] = rep.kl_var;
    summary["target_mean"] = rep.target_mean;
    summary["target_var"] = rep.target_var;
    summary["z_scores"] = Json{{"mean", rep.z_mean}, {"var", rep.z_var}};
    summary["verdict"] = ok;
    write_json(out_path(c.global, "kl.json"), summary);
    log << "mean " << format_double(rep.kl_mean) << " vs " << format_double(rep.target_mean) << " (z "
        << format_double(rep.z_mean) << "), var " << format_double(rep.kl_var) << " vs "
        << format_double(rep.target_var) << " (z " << format_double(rep.z_var) << ") -> " << verdict_word(ok) << "\n";
    return ok ? kExitPass : kExitVerdictFail;
}

/// "key = default" lines for --help, flattened from the default config.
inline std::string describe_keys(const Json& defaults, const std::string& prefix = "") {
    std::string out;
    for (const auto& item : defaults.items()) {
        const std::string key = prefix.empty() ? item.key() : prefix + "." + item.key();
        if (item.value().is_object()) {
            out += describe_keys(item.value(), key);
        } else {
            out += "  " + key + " = " + item.value().dump() + "\n";
        }
    }
    return out;
}

inline Json default_config(const std::string& command) {
    if (command == "simulate") {
        return to_json(SimulateConfig{});
    }
    if (command == "estimate-alpha") {
        return to_json(EstimateConfig{});
    }
    if (command == "contract") {
        return to_json(ContractConfig{});
    }
    if (command == "verify-assumptions") {
        return to_json(VerifyConfig{});
    }
    if (command == "prior-mass") {
        return to_json(PriorMassConfig{});
    }
    if (command == "kl-check") {
        return to_json(KLConfig{});
    }
    throw std::invalid_argument("unknown command " + command);
}

/// Runs one command and maps failures onto exit codes: 1 for a failed
/// verdict, 2 for configuration, validation, numerical or I/O errors.
inline int run_command(const std::string& command, const std::string& config_path, const Overrides& ov,
                       std::ostream& log, std::ostream& err) {
    try {
        const Json raw = load_config_json(config_path);
        if (command == "simulate") {
            return cmd_simulate(raw, ov, log);
        }
        if (command == "estimate-alpha") {
            return cmd_estimate_alpha(raw, ov, log);
        }
        if (command == "contract") {
            return cmd_contract(raw, ov, log);
        }
        if (command == "verify-assumptions") {
            return cmd_verify(raw, ov, log);
        }
        if (command == "prior-mass") {
            return cmd_prior_mass(raw, ov, log);
        }
        if (command == "kl-check") {
            return cmd_kl_check(raw, ov, log);
        }
        err << "error: unknown command " << command << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace ebip::cli
