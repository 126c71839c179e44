#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebip/contraction.hpp"
#include "ebip/empirical_bayes.hpp"
#include "ebip/instance.hpp"
#include "ebip/posterior.hpp"
#include "ebip/sequence.hpp"

namespace ebip {

using Json = nlohmann::ordered_json;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Object reader that remembers which keys were read so leftovers can be
/// reported as typos.
class StrictObject {
public:
    StrictObject(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) {
            throw ConfigError(context_ + ": expected a JSON object");
        }
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }

    const Json& at(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) {
            throw ConfigError(context_ + ": missing required key '" + key + "'");
        }
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) {
            return fallback;
        }
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(context_ + ": bad value for '" + key + "': " + e.what());
        }
    }

    template <class T>
    T require_value(const std::string& key) {
        const Json& v = at(key);
        try {
            return v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(context_ + ": bad value for '" + key + "': " + e.what());
        }
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.contains(item.key())) {
                throw ConfigError(context_ + ": unknown key '" + item.key() + "'");
            }
        }
    }

    const std::string& context() const { return context_; }

private:
    const Json& j_;
    std::string context_;
    std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Leaf records

inline Json to_json(const EBConfig& c) {
    return Json{{"offset_c1", c.offset_c1},       {"threshold_lo", c.threshold_lo}, {"threshold_hi", c.threshold_hi},
                {"grid_points", c.grid_points},   {"refine_tol", c.refine_tol},     {"beta_tilde_max", c.beta_tilde_max}};
}

inline EBConfig eb_from_json(const Json& j) {
    StrictObject o(j, "eb");
    EBConfig c;
    c.offset_c1 = o.get("offset_c1", c.offset_c1);
    c.threshold_lo = o.get("threshold_lo", c.threshold_lo);
    c.threshold_hi = o.get("threshold_hi", c.threshold_hi);
    c.grid_points = o.get("grid_points", c.grid_points);
    c.refine_tol = o.get("refine_tol", c.refine_tol);
    c.beta_tilde_max = o.get("beta_tilde_max", c.beta_tilde_max);
    o.finish();
    c.validate();
    return c;
}

inline Json to_json(const SelfSimilarSpec& s) {
    return Json{{"epsilon", s.epsilon}, {"n0", s.n0}, {"rho", s.rho}, {"beta", s.ball.beta}, {"radius", s.ball.radius}};
}

inline SelfSimilarSpec self_similar_from_json(const Json& j) {
    StrictObject o(j, "self_similar");
    SelfSimilarSpec s;
    s.epsilon = o.get("epsilon", s.epsilon);
    s.n0 = o.get("n0", s.n0);
    s.rho = o.get("rho", s.rho);
    s.ball.beta = o.get("beta", s.ball.beta);
    s.ball.radius = o.get("radius", s.ball.radius);
    o.finish();
    s.validate();
    return s;
}

inline std::string to_string(TruthFamily f) {
    switch (f) {
    case TruthFamily::PolynomialDecay:
        return "polynomial_decay";
    case TruthFamily::RandomSelfSimilar:
        return "random_self_similar";
    case TruthFamily::SingleSpike:
        return "single_spike";
    }
    return "?";
}

inline TruthFamily truth_family_from_string(const std::string& s) {
    if (s == "polynomial_decay") {
        return TruthFamily::PolynomialDecay;
    }
    if (s == "random_self_similar") {
        return TruthFamily::RandomSelfSimilar;
    }
    if (s == "single_spike") {
        return TruthFamily::SingleSpike;
    }
    throw ConfigError("truth: unknown family '" + s + "'");
}

inline Json to_json(const TruthSpec& t) {
    return Json{{"family", to_string(t.family)}, {"gamma", t.gamma}, {"seed", t.seed}};
}

inline TruthSpec truth_from_json(const Json& j) {
    StrictObject o(j, "truth");
    TruthSpec t;
    t.family = truth_family_from_string(o.get<std::string>("family", to_string(t.family)));
    t.gamma = o.get("gamma", t.gamma);
    t.seed = o.get("seed", t.seed);
    o.finish();
    require(t.gamma >= 1.0, "truth: gamma must be >= 1");
    return t;
}

// ---------------------------------------------------------------------------
// Instance descriptors

inline Json fourier_to_json(const std::vector<FourierCoeff>& coeffs) {
    Json out = Json::array();
    for (const auto& c : coeffs) {
        Json row = Json::array();
        for (int k : c.k) {
            row.push_back(k);
        }
        row.push_back(c.value.real());
        row.push_back(c.value.imag());
        out.push_back(row);
    }
    return out;
}

inline std::vector<FourierCoeff> fourier_from_json(const Json& j, int d, const std::string& key) {
    if (!j.is_array()) {
        throw ConfigError(key + ": expected an array of [k..., re, im] rows");
    }
    std::vector<FourierCoeff> out;
    for (const auto& row : j) {
        if (!row.is_array() || static_cast<int>(row.size()) != d + 2) {
            throw ConfigError(key + ": each row must have d + 2 entries [k..., re, im]");
        }
        FourierCoeff c;
        for (int m = 0; m < d; ++m) {
            if (!row[static_cast<std::size_t>(m)].is_number_integer()) {
                throw ConfigError(key + ": frequency entries must be integers");
            }
            c.k.push_back(row[static_cast<std::size_t>(m)].get<int>());
        }
        if (!row[static_cast<std::size_t>(d)].is_number() || !row[static_cast<std::size_t>(d + 1)].is_number()) {
            throw ConfigError(key + ": coefficient entries must be numbers");
        }
        c.value = {row[static_cast<std::size_t>(d)].get<double>(), row[static_cast<std::size_t>(d + 1)].get<double>()};
        out.push_back(std::move(c));
    }
    try {
        require_hermitian(out, d);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
    }
    return out;
}

inline Json to_json(const InstanceDescriptor& desc) {
    if (const auto* diag = std::get_if<DiagonalSpec>(&desc)) {
        return Json{{"kind", "diagonal"}, {"N", diag->N}, {"p", diag->p}, {"d", diag->d}, {"beta", diag->beta},
                    {"ell", diag->ell}};
    }
    const auto& t = std::get<TorusSpec>(desc);
    return Json{{"kind", "torus"},
                {"example", t.example},
                {"d", t.d},
                {"K", t.K},
                {"period", t.period},
                {"q_fourier", fourier_to_json(t.q)},
                {"r_fourier", fourier_to_json(t.r)}};
}

inline InstanceDescriptor descriptor_from_json(const Json& j) {
    StrictObject o(j, "instance");
    const std::string kind = o.get<std::string>("kind", o.has("example") ? "torus" : "diagonal");
    if (kind == "diagonal") {
        DiagonalSpec s;
        s.N = o.get("N", s.N);
        s.p = o.get("p", s.p);
        s.d = o.get("d", s.d);
        s.beta = o.get("beta", s.beta);
        s.ell = o.get("ell", s.ell);
        o.finish();
        require(s.N >= 16, "instance: N must be >= 16");
        return s;
    }
    if (kind != "torus") {
        throw ConfigError("instance: kind must be 'diagonal' or 'torus'");
    }
    TorusSpec t;
    t.example = o.get("example", t.example);
    t.d = o.get("d", t.d);
    t.K = o.get("K", t.K);
    t.period = o.get("period", t.period);
    require(t.example == 1 || t.example == 2, "instance: example must be 1 or 2");
    require(t.d >= 1 && t.d <= 3, "instance: d must be 1, 2 or 3");
    if (o.has("q_fourier")) {
        t.q = fourier_from_json(o.at("q_fourier"), t.d, "q_fourier");
    }
    if (o.has("r_fourier")) {
        t.r = fourier_from_json(o.at("r_fourier"), t.d, "r_fourier");
    }
    o.finish();
    return t;
}

// ---------------------------------------------------------------------------
// Data realizations

inline Json to_json(const DataRealization& data) {
    return Json{{"n", data.n}, {"seed", data.seed}, {"d", data.d.to_std()}, {"truth", data.truth.to_std()}};
}

inline DataRealization data_from_json(const Json& j) {
    StrictObject o(j, "data");
    DataRealization data{SpectralVector(o.require_value<std::vector<double>>("d")), o.require_value<double>("n"),
                         o.get<std::uint64_t>("seed", 0),
                         SpectralVector(o.require_value<std::vector<double>>("truth"))};
    o.finish();
    require(data.n > 0.0, "data: n must be > 0");
    require(data.d.size() == data.truth.size(), "data: d and truth lengths differ");
    return data;
}

// ---------------------------------------------------------------------------
// Command configurations. Every command accepts "seed", "threads" and "out";
// the corresponding flags override them.

struct GlobalOptions {
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out = "out";
};

inline void read_globals(StrictObject& o, GlobalOptions& g) {
    g.seed = o.get("seed", g.seed);
    g.threads = o.get("threads", g.threads);
    g.out = o.get("out", g.out);
    require(g.threads >= 0, "threads must be >= 0");
}

inline void write_globals(Json& j, const GlobalOptions& g) {
    j["seed"] = g.seed;
    j["threads"] = g.threads;
    j["out"] = g.out;
}

struct SimulateConfig {
    GlobalOptions global;
    InstanceDescriptor instance = DiagonalSpec{1024, 2.0, 2, 0.0, 0.0};
    TruthSpec truth{TruthFamily::SingleSpike, 1.0, 1};
    double n = 100.0;
};

inline Json to_json(const SimulateConfig& c) {
    Json j{{"instance", to_json(c.instance)}, {"truth", to_json(c.truth)}, {"n", c.n}};
    write_globals(j, c.global);
    return j;
}

inline SimulateConfig simulate_config_from_json(const Json& j) {
    StrictObject o(j, "simulate config");
    SimulateConfig c;
    read_globals(o, c.global);
    if (o.has("instance")) {
        c.instance = descriptor_from_json(o.at("instance"));
    }
    if (o.has("truth")) {
        c.truth = truth_from_json(o.at("truth"));
    }
    c.n = o.get("n", c.n);
    o.finish();
    require(c.n > 0.0, "simulate: n must be > 0");
    return c;
}

struct EstimateConfig {
    GlobalOptions global;
    InstanceDescriptor instance = DiagonalSpec{1024, 2.0, 2, 0.0, 0.0};
    std::string data_file;
    TruthSpec truth;
    double n = 1e4;
    EBConfig eb;
    bool write_curve = true;
};

inline Json to_json(const EstimateConfig& c) {
    Json j{{"instance", to_json(c.instance)}, {"data_file", c.data_file}, {"truth", to_json(c.truth)},
           {"n", c.n},                        {"eb", to_json(c.eb)},      {"write_curve", c.write_curve}};
    write_globals(j, c.global);
    return j;
}

inline EstimateConfig estimate_config_from_json(const Json& j) {
    StrictObject o(j, "estimate-alpha config");
    EstimateConfig c;
    read_globals(o, c.global);
    if (o.has("instance")) {
        c.instance = descriptor_from_json(o.at("instance"));
    }
    c.data_file = o.get("data_file", c.data_file);
    if (o.has("truth")) {
        c.truth = truth_from_json(o.at("truth"));
    }
    c.n = o.get("n", c.n);
    if (o.has("eb")) {
        c.eb = eb_from_json(o.at("eb"));
    }
    c.write_curve = o.get("write_curve", c.write_curve);
    o.finish();
    require(c.n >= 3.0, "estimate-alpha: n must be >= 3");
    return c;
}

struct FitSpec {
    std::string field = "err_u";
    std::optional<double> target; ///< defaults to the theoretical exponent for the field
    double tolerance = 0.1;
};

struct ContractConfig {
    GlobalOptions global;
    ExperimentPlan plan;
    std::vector<FitSpec> fits{FitSpec{}};
};

inline std::string to_string(EstimatorKind k) { return k == EstimatorKind::OracleAlpha ? "oracle" : "empirical_bayes"; }
inline std::string to_string(MnRule r) { return r == MnRule::SqrtLog ? "sqrt_log" : "one"; }

inline Json to_json(const FitSpec& f) {
    Json j{{"field", f.field}};
    j["target"] = f.target ? Json(*f.target) : Json(nullptr);
    j["tolerance"] = f.tolerance;
    return j;
}

inline Json to_json(const ContractConfig& c) {
    const auto& p = c.plan;
    Json fits = Json::array();
    for (const auto& f : c.fits) {
        fits.push_back(to_json(f));
    }
    Json j{{"instance", to_json(p.instance)},
           {"truth", to_json(p.truth)},
           {"n_grid", p.n_grid},
           {"replicates", p.replicates},
           {"estimator", Json{{"kind", to_string(p.estimator)}, {"alpha", p.oracle_alpha}}},
           {"eb", to_json(p.eb)},
           {"eps_exponent", p.eps_exponent},
           {"m_n_rule", to_string(p.m_n_rule)},
           {"beta_tilde_min", p.beta_tilde_min},
           {"tail_samples", p.tail_samples},
           {"record_timing", p.record_timing},
           {"fits", fits}};
    write_globals(j, c.global);
    return j;
}

inline FitSpec fit_from_json(const Json& j) {
    StrictObject o(j, "fit");
    FitSpec f;
    f.field = o.get("field", f.field);
    if (o.has("target") && !o.at("target").is_null()) {
        f.target = o.require_value<double>("target");
    }
    f.tolerance = o.get("tolerance", f.tolerance);
    o.finish();
    if (f.field != "err_u" && f.field != "err_m") {
        throw ConfigError("fit: field must be 'err_u' or 'err_m'");
    }
    require(f.tolerance > 0.0, "fit: tolerance must be > 0");
    return f;
}

inline ContractConfig contract_config_from_json(const Json& j) {
    StrictObject o(j, "contract config");
    ContractConfig c;
    auto& p = c.plan;
    read_globals(o, c.global);
    if (o.has("instance")) {
        p.instance = descriptor_from_json(o.at("instance"));
    }
    if (o.has("truth")) {
        p.truth = truth_from_json(o.at("truth"));
    }
    p.n_grid = o.get("n_grid", p.n_grid);
    p.replicates = o.get("replicates", p.replicates);
    if (o.has("estimator")) {
        StrictObject e(o.at("estimator"), "estimator");
        const std::string kind = e.get<std::string>("kind", to_string(p.estimator));
        if (kind == "oracle") {
            p.estimator = EstimatorKind::OracleAlpha;
        } else if (kind == "empirical_bayes") {
            p.estimator = EstimatorKind::EmpiricalBayes;
        } else {
            throw ConfigError("estimator: kind must be 'oracle' or 'empirical_bayes'");
        }
        p.oracle_alpha = e.get("alpha", p.oracle_alpha);
        e.finish();
    }
    if (o.has("eb")) {
        p.eb = eb_from_json(o.at("eb"));
    }
    p.eps_exponent = o.get("eps_exponent", p.eps_exponent);
    const std::string rule = o.get<std::string>("m_n_rule", to_string(p.m_n_rule));
    if (rule == "sqrt_log") {
        p.m_n_rule = MnRule::SqrtLog;
    } else if (rule == "one") {
        p.m_n_rule = MnRule::One;
    } else {
        throw ConfigError("m_n_rule must be 'sqrt_log' or 'one'");
    }
    p.beta_tilde_min = o.get("beta_tilde_min", p.beta_tilde_min);
    p.tail_samples = o.get("tail_samples", p.tail_samples);
    p.record_timing = o.get("record_timing", p.record_timing);
    if (o.has("fits")) {
        c.fits.clear();
        if (!o.at("fits").is_array()) {
            throw ConfigError("fits: expected an array");
        }
        for (const auto& f : o.at("fits")) {
            c.fits.push_back(fit_from_json(f));
        }
    }
    o.finish();
    p.validate();
    return c;
}

struct VerifyConfig {
    GlobalOptions global;
    InstanceDescriptor instance =
        TorusSpec{1, 1, 32, 1.0, {{{0}, {2.0, 0.0}}, {{1}, {0.5, 0.0}}, {{-1}, {0.5, 0.0}}}, {}};
    std::vector<double> alpha_grid{0.5, 1.0, 1.5};
    std::vector<double> r_grid{0.0, 0.5, 1.0};
    int probes = 16;
    double band = kAssumptionBand;
};

inline Json to_json(const VerifyConfig& c) {
    Json j{{"instance", to_json(c.instance)}, {"alpha_grid", c.alpha_grid}, {"r_grid", c.r_grid},
           {"probes", c.probes},              {"band", c.band}};
    write_globals(j, c.global);
    return j;
}

inline VerifyConfig verify_config_from_json(const Json& j) {
    StrictObject o(j, "verify-assumptions config");
    VerifyConfig c;
    read_globals(o, c.global);
    if (o.has("instance")) {
        c.instance = descriptor_from_json(o.at("instance"));
    }
    c.alpha_grid = o.get("alpha_grid", c.alpha_grid);
    c.r_grid = o.get("r_grid", c.r_grid);
    c.probes = o.get("probes", c.probes);
    c.band = o.get("band", c.band);
    o.finish();
    require(c.probes >= 1, "verify-assumptions: probes must be >= 1");
    require(c.band >= 1.0, "verify-assumptions: band must be >= 1");
    return c;
}

struct PriorMassConfig {
    GlobalOptions global;
    double alpha = 0.5;
    SelfSimilarSpec self_similar{0.1, 10, 2.0, BallSpec{BallKind::Hyperrectangle, 1.0, 1.0}};
    int samples = 500;
    int N = 4096;
    double threshold = 0.99;
};

inline Json to_json(const PriorMassConfig& c) {
    Json j{{"alpha", c.alpha}, {"self_similar", to_json(c.self_similar)}, {"samples", c.samples}, {"N", c.N},
           {"threshold", c.threshold}};
    write_globals(j, c.global);
    return j;
}

inline PriorMassConfig prior_mass_config_from_json(const Json& j) {
    StrictObject o(j, "prior-mass config");
    PriorMassConfig c;
    read_globals(o, c.global);
    c.alpha = o.get("alpha", c.alpha);
    if (o.has("self_similar")) {
        c.self_similar = self_similar_from_json(o.at("self_similar"));
    }
    c.samples = o.get("samples", c.samples);
    c.N = o.get("N", c.N);
    c.threshold = o.get("threshold", c.threshold);
    o.finish();
    require(c.samples >= 100, "prior-mass: samples must be >= 100");
    require(c.threshold >= 0.0 && c.threshold <= 1.0, "prior-mass: threshold must be in [0, 1]");
    return c;
}

struct KLConfig {
    GlobalOptions global;
    InstanceDescriptor instance =
        TorusSpec{1, 1, 32, 1.0, {{{0}, {2.0, 0.0}}, {{1}, {0.5, 0.0}}, {{-1}, {0.5, 0.0}}}, {}};
    TruthSpec truth;
    double n = 1e4;
    int mc = 10000;
    /// u = u_truth + perturbation * xi with xi_i ~ N(0, 1) i^{-1}.
    double perturbation = 0.05;
    double z_mean_max = 3.0;
    double z_var_max = 5.0;
};

inline Json to_json(const KLConfig& c) {
    Json j{{"instance", to_json(c.instance)}, {"truth", to_json(c.truth)}, {"n", c.n},
           {"mc", c.mc},                      {"perturbation", c.perturbation}, {"z_mean_max", c.z_mean_max},
           {"z_var_max", c.z_var_max}};
    write_globals(j, c.global);
    return j;
}

inline KLConfig kl_config_from_json(const Json& j) {
    StrictObject o(j, "kl-check config");
    KLConfig c;
    read_globals(o, c.global);
    if (o.has("instance")) {
        c.instance = descriptor_from_json(o.at("instance"));
    }
    if (o.has("truth")) {
        c.truth = truth_from_json(o.at("truth"));
    }
    c.n = o.get("n", c.n);
    c.mc = o.get("mc", c.mc);
    c.perturbation = o.get("perturbation", c.perturbation);
    c.z_mean_max = o.get("z_mean_max", c.z_mean_max);
    c.z_var_max = o.get("z_var_max", c.z_var_max);
    o.finish();
    require(c.n > 0.0, "kl-check: n must be > 0");
    require(c.mc >= 1000, "kl-check: mc must be >= 1000");
    return c;
}

} // namespace ebip
