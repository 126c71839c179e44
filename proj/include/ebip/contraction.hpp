#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ebip/empirical_bayes.hpp"
#include "ebip/error.hpp"
#include "ebip/instance.hpp"
#include "ebip/posterior.hpp"
#include "ebip/sequence.hpp"

namespace ebip {

struct TruthSpec {
    TruthFamily family = TruthFamily::PolynomialDecay;
    double gamma = 1.0;
    std::uint64_t seed = 1;
};

enum class EstimatorKind { OracleAlpha, EmpiricalBayes };
enum class MnRule { SqrtLog, One };

struct ExperimentPlan {
    InstanceDescriptor instance = DiagonalSpec{};
    TruthSpec truth;
    std::vector<double> n_grid{1e2, 1e3, 1e4, 1e5};
    int replicates = 5;
    EstimatorKind estimator = EstimatorKind::EmpiricalBayes;
    double oracle_alpha = 1.5;
    EBConfig eb;
    double eps_exponent = 0.1;
    MnRule m_n_rule = MnRule::SqrtLog;
    std::uint64_t master_seed = 1;
    /// Declared lower bound on beta_tilde, used only for the truncation floor.
    double beta_tilde_min = 0.5;
    int tail_samples = 256;
    int threads = 1;
    bool record_timing = false;

    void validate() const {
        require(!n_grid.empty(), "plan: n_grid is empty");
        for (std::size_t k = 0; k < n_grid.size(); ++k) {
            require(n_grid[k] > 0.0, "plan: n values must be > 0");
            require(k == 0 || n_grid[k] > n_grid[k - 1], "plan: n_grid must be strictly increasing");
        }
        require(replicates >= 1, "plan: replicates must be >= 1");
        require(eps_exponent >= 0.0, "plan: eps_exponent must be >= 0");
        require(beta_tilde_min > 0.0, "plan: beta_tilde_min must be > 0");
        require(tail_samples >= 1, "plan: tail_samples must be >= 1");
        require(threads >= 0, "plan: threads must be >= 0");
        if (estimator == EstimatorKind::EmpiricalBayes) {
            eb.validate();
            require(n_grid.front() >= 3.0, "plan: empirical Bayes needs n >= 3");
        }
    }
};

/// N >= 8 * max(n)^{1/(1 + 2 beta_tilde_min)}.
inline int truncation_floor(const ExperimentPlan& plan) {
    return static_cast<int>(std::ceil(8.0 * std::pow(plan.n_grid.back(), 1.0 / (1.0 + 2.0 * plan.beta_tilde_min))));
}

struct ContractionRecord {
    double n = 0.0;
    int replicate = 0;
    double alpha_hat = 0.0;
    double err_u = 0.0;
    double err_m = 0.0;
    double posterior_trace = 0.0;
    double tail_mass = 0.0;
    double wall_time_ms = 0.0;

    friend bool operator==(const ContractionRecord&, const ContractionRecord&) = default;
};

/// Per-record side outputs that do not belong to the CSV schema.
struct ContractionDiagnostics {
    double eps_n = 0.0;
    double m_n = 0.0;
    double sieve_fraction = 0.0;
    int k_n = 0;
    double rho_n = 0.0;
};

struct ContractionRun {
    std::vector<ContractionRecord> records;
    std::vector<ContractionDiagnostics> diagnostics;
    int truncation = 0;
};

/// Smallest alpha handed to the posterior when the estimator lands at or
/// below the trace-class threshold.
inline constexpr double kAlphaFloorMargin = 0.05;

/// Polynomial part of the u-space rate, n^{-p gamma / (d + 2p(gamma + Delta - 1) + eps)}.
inline double contraction_radius(const ProblemInstance& instance, double n, double eps) {
    const double p = instance.spectrum().p();
    const double d = instance.spectrum().d();
    const auto& e = instance.exponents();
    return std::pow(n, -p * e.gamma / (d + 2.0 * p * (e.gamma + e.delta - 1.0) + eps));
}

inline double m_n_value(MnRule rule, double n) { return rule == MnRule::SqrtLog ? std::sqrt(std::log(n)) : 1.0; }

/// k_n and rho_n of the sieve with L_n = (log n)^3 (loglog n)^{1/2}.
inline std::pair<int, double> sieve_parameters(const ProblemInstance& instance, double n, double alpha_hat, double eps) {
    const double p = instance.spectrum().p();
    const double d = instance.spectrum().d();
    const auto& e = instance.exponents();
    const double denom = 1.0 + 2.0 * p / d * (e.gamma + e.delta - 1.0) + eps;
    const int k_n = std::min(instance.size(), static_cast<int>(std::ceil(std::pow(n, 1.0 / denom))));
    const double l_n = std::pow(std::log(n), 3.0) * std::sqrt(std::max(std::log(std::log(n)), 0.0));
    const double rho_n = l_n * std::pow(n, -0.5 * (2.0 * p / d * alpha_hat - 1.0 - eps) / denom);
    return {k_n, rho_n};
}

/// Fraction of samples with sum_{i > k_n} u_i^2 <= c rho_n^2.
inline double sieve_mass(const std::vector<SpectralVector>& samples, int k_n, double rho_n, double c) {
    if (samples.empty()) {
        return 0.0;
    }
    int pass = 0;
    for (const auto& s : samples) {
        require(k_n >= 0 && k_n <= s.size(), "sieve_mass: k_n out of range");
        const double tail = s.values().tail(s.size() - k_n).squaredNorm();
        pass += tail <= c * rho_n * rho_n ? 1 : 0;
    }
    return static_cast<double>(pass) / static_cast<double>(samples.size());
}

namespace detail {

/// Runs body(0..count-1) on `threads` workers (0 = hardware concurrency).
/// Each task writes only its own slot; the first failure in index order is rethrown.
template <class Body>
void parallel_for(int count, int threads, Body&& body) {
    if (threads == 0) {
        threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    threads = std::max(1, std::min(threads, count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int k = next++; k < count; k = next++) {
            try {
                body(k);
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace detail

inline ContractionRun run_contraction(const ExperimentPlan& plan) {
    plan.validate();
    const ProblemInstance instance = build_instance(plan.instance, plan.truth.gamma);
    const int floor = truncation_floor(plan);
    if (instance.size() < floor) {
        throw std::invalid_argument("plan: truncation N = " + std::to_string(instance.size()) +
                                    " is below the floor " + std::to_string(floor) +
                                    " implied by max(n_grid) and beta_tilde_min");
    }
    if (plan.estimator == EstimatorKind::OracleAlpha) {
        require(plan.oracle_alpha > instance.alpha0(), "plan: oracle alpha must exceed alpha_0");
    }
    const SpectralVector truth = make_truth(plan.truth.family, plan.truth.gamma, instance.spectrum().p(),
                                            instance.spectrum().d(), instance.size(), plan.truth.seed);
    const Eigen::VectorXd m_truth = instance.forward().apply(truth.values());

    const int reps = plan.replicates;
    const int count = static_cast<int>(plan.n_grid.size()) * reps;
    ContractionRun run;
    run.truncation = instance.size();
    run.records.resize(static_cast<std::size_t>(count));
    run.diagnostics.resize(static_cast<std::size_t>(count));

    detail::parallel_for(count, plan.threads, [&](int task) {
        const double n = plan.n_grid[static_cast<std::size_t>(task / reps)];
        const int rep = task % reps;
        try {
            const auto start = std::chrono::steady_clock::now();
            const DataRealization data =
                simulate_data(instance, truth, n, stream_key(plan.master_seed, "data", n, static_cast<std::uint64_t>(rep)));
            double alpha = plan.oracle_alpha;
            if (plan.estimator == EstimatorKind::EmpiricalBayes) {
                alpha = estimate_alpha(data.d, n, instance, plan.eb).alpha_hat;
                alpha = std::max(alpha, instance.alpha0() + kAlphaFloorMargin);
            }
            const PosteriorGaussian post = posterior_u(data.d, n, alpha, instance);
            ContractionRecord rec;
            rec.n = n;
            rec.replicate = rep;
            rec.alpha_hat = alpha;
            rec.err_u = (post.mean.values() - truth.values()).norm();
            rec.err_m = (instance.forward().apply(post.mean.values()) - m_truth).norm();
            rec.posterior_trace = covariance_trace(instance, alpha, n);

            ContractionDiagnostics diag;
            diag.eps_n = contraction_radius(instance, n, plan.eps_exponent);
            diag.m_n = m_n_value(plan.m_n_rule, n);
            const auto samples = posterior_sample(
                post, plan.tail_samples, stream_key(plan.master_seed, "posterior", n, static_cast<std::uint64_t>(rep)));
            int outside = 0;
            for (const auto& s : samples) {
                outside += (s.values() - truth.values()).norm() >= diag.m_n * diag.eps_n ? 1 : 0;
            }
            rec.tail_mass = static_cast<double>(outside) / static_cast<double>(samples.size());
            const auto [k_n, rho_n] = sieve_parameters(instance, n, alpha, plan.eps_exponent);
            diag.k_n = k_n;
            diag.rho_n = rho_n;
            diag.sieve_fraction = sieve_mass(samples, k_n, rho_n, 1.0);
            if (plan.record_timing) {
                rec.wall_time_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
            run.records[static_cast<std::size_t>(task)] = rec;
            run.diagnostics[static_cast<std::size_t>(task)] = diag;
        } catch (const std::exception& e) {
            throw NumericalError("run_contraction: n = " + std::to_string(n) + ", replicate " + std::to_string(rep) +
                                 ": " + e.what());
        }
    });
    return run;
}

enum class ErrorField { ErrU, ErrM };

struct RateFit {
    std::string field;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double target_exponent = 0.0;
    double tolerance = 0.0;
    bool verdict = false;
};

struct ErrorSummary {
    double n = 0.0;
    double mean = 0.0;
    double median = 0.0;
    int count = 0;
};

inline double median_of(std::vector<double> v) {
    require(!v.empty(), "median of empty list");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Linear-interpolated quantile, q in [0, 1].
inline double quantile_of(std::vector<double> v, double q) {
    require(!v.empty(), "quantile of empty list");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<ErrorSummary> summarize(const std::vector<ContractionRecord>& records, ErrorField field) {
    std::map<double, std::vector<double>> groups;
    for (const auto& r : records) {
        groups[r.n].push_back(field == ErrorField::ErrU ? r.err_u : r.err_m);
    }
    std::vector<ErrorSummary> out;
    for (const auto& [n, v] : groups) {
        double sum = 0.0;
        for (double x : v) {
            sum += x;
        }
        out.push_back({n, sum / static_cast<double>(v.size()), median_of(v), static_cast<int>(v.size())});
    }
    return out;
}

/// OLS of log(mean error) on log n.
inline RateFit fit_rate(const std::vector<ContractionRecord>& records, ErrorField field, double target, double tolerance) {
    const auto groups = summarize(records, field);
    require(groups.size() >= 4, "fit_rate: need at least 4 distinct n values");
    const double k = static_cast<double>(groups.size());
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& g : groups) {
        require(g.mean > 0.0, "fit_rate: mean error must be positive");
        sx += std::log(g.n);
        sy += std::log(g.mean);
    }
    const double mx = sx / k;
    const double my = sy / k;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& g : groups) {
        const double dx = std::log(g.n) - mx;
        const double dy = std::log(g.mean) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    require(sxx > 0.0, "fit_rate: degenerate design");
    RateFit fit;
    fit.field = field == ErrorField::ErrU ? "err_u" : "err_m";
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    fit.target_exponent = target;
    fit.tolerance = tolerance;
    fit.verdict = std::abs(fit.slope - target) <= tolerance;
    return fit;
}

/// -beta_tilde / (1 + 2 beta_tilde), beta_tilde = (p/d)(gamma + Delta - 1).
inline double target_exponent_m(const ProblemInstance& instance) {
    const auto& e = instance.exponents();
    const double bt = instance.spectrum().p() / instance.spectrum().d() * (e.gamma + e.delta - 1.0);
    return -bt / (1.0 + 2.0 * bt);
}

/// -p gamma / (d + 2p(gamma + Delta - 1) + eps).
inline double target_exponent_u(const ProblemInstance& instance, double eps = 0.0) {
    const double p = instance.spectrum().p();
    const double d = instance.spectrum().d();
    const auto& e = instance.exponents();
    return -p * e.gamma / (d + 2.0 * p * (e.gamma + e.delta - 1.0) + eps);
}

/// Fraction of draws with coordinates N(0, i^{-1-2 alpha}) certified self-similar.
inline double prior_self_similar_mass(double alpha, const SelfSimilarSpec& spec, int samples, int n, std::uint64_t seed) {
    spec.validate();
    require(samples >= 100, "prior_self_similar_mass: samples must be >= 100");
    require(alpha <= spec.ball.beta, "prior_self_similar_mass: alpha must be <= beta");
    Eigen::VectorXd sd(n);
    for (int i = 1; i <= n; ++i) {
        sd(i - 1) = std::pow(static_cast<double>(i), -0.5 - alpha);
    }
    int certified = 0;
    for (int k = 0; k < samples; ++k) {
        RandomStream rng(stream_key(seed, "prior-draw", 0.0, static_cast<std::uint64_t>(k)));
        const SpectralVector v(Eigen::VectorXd(sd.cwiseProduct(standard_normal_vector(rng, n))));
        certified += is_self_similar(v, spec).holds ? 1 : 0;
    }
    return static_cast<double>(certified) / static_cast<double>(samples);
}

} // namespace ebip
