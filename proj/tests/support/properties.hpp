#pragma once

// Randomized property suites shared by test_properties and the acceptance run.
// Each returns the number of violations out of `cases` draws.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ebip/ebip.hpp"

namespace ebip::testing {

struct SuiteResult {
    std::string name;
    int cases = 0;
    int violations = 0;
    std::string first_failure;
};

inline constexpr double kSlack = 1e-12;

inline Eigen::VectorXd random_vector(RandomStream& rng, int n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = scale * rng.normal();
    }
    return v;
}

inline void record(SuiteResult& r, bool ok, const std::string& what) {
    ++r.cases;
    if (!ok) {
        if (r.violations == 0) {
            r.first_failure = what;
        }
        ++r.violations;
    }
}

/// ||v||_t <= ||v||_r^{(s-t)/(s-r)} ||v||_s^{(t-r)/(s-r)} for r < t < s.
inline SuiteResult interpolation_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"interpolation inequality"};
    RandomStream rng(stream_key(seed, "prop-interpolation"));
    for (int k = 0; k < cases; ++k) {
        const int n = 8 + static_cast<int>(rng.uniform() * 120);
        const int d = 1 + static_cast<int>(rng.uniform() * 3);
        const Spectrum spec = Spectrum::polynomial(rng.uniform(0.5, 3.0), d, n);
        Eigen::VectorXd v = random_vector(rng, n);
        for (int i = 0; i < n; ++i) {
            v(i) *= std::pow(i + 1.0, -rng.uniform(0.0, 3.0));
        }
        const SpectralVector sv(v);
        double r = rng.uniform(-2.0, 1.0);
        double s = r + rng.uniform(0.1, 2.0);
        const double t = rng.uniform(r, s);
        const double lhs = hilbert_scale_norm(sv, t, spec);
        const double theta = (s - t) / (s - r);
        const double rhs = std::pow(hilbert_scale_norm(sv, r, spec), theta) * std::pow(hilbert_scale_norm(sv, s, spec), 1.0 - theta);
        record(res, lhs <= rhs * (1.0 + kSlack), "case " + std::to_string(k));
    }
    return res;
}

/// ||posterior_mean_m(d)|| <= ||d||, on diagonal and Example 1 instances.
inline SuiteResult shrinkage_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"shrinkage"};
    RandomStream rng(stream_key(seed, "prop-shrinkage"));
    const std::vector<FourierCoeff> q{{{0}, {2.0, 0.0}}, {{1}, {0.5, 0.0}}, {{-1}, {0.5, 0.0}}};
    const ProblemInstance ex1 = build_example1(TorusSpec{1, 1, 16, 2.0 * M_PI, q, {}});
    for (int k = 0; k < cases; ++k) {
        const bool use_torus = k % 2 == 1;
        const ProblemInstance inst = use_torus ? ex1 : diagonal_instance(16 + static_cast<int>(rng.uniform() * 200), 2.0, 1);
        const SpectralVector d(random_vector(rng, inst.size(), std::exp(rng.uniform(-5.0, 5.0))));
        const double n = std::exp(rng.uniform(0.0, std::log(1e9)));
        const double alpha = inst.alpha0() + rng.uniform(0.01, 3.0);
        const double norm = posterior_mean_m(d, n, alpha, inst).values().norm();
        record(res, norm <= d.values().norm() * (1.0 + kSlack), "case " + std::to_string(k));
    }
    return res;
}

/// covariance_trace strictly decreasing in n.
inline SuiteResult trace_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"trace monotonicity"};
    RandomStream rng(stream_key(seed, "prop-trace"));
    const std::vector<FourierCoeff> q{{{0}, {2.0, 0.0}}, {{1}, {0.5, 0.0}}, {{-1}, {0.5, 0.0}}};
    const ProblemInstance ex1 = build_example1(TorusSpec{1, 1, 16, 2.0 * M_PI, q, {}});
    for (int k = 0; k < cases; ++k) {
        const ProblemInstance inst = k % 2 == 1 ? ex1 : diagonal_instance(16 + static_cast<int>(rng.uniform() * 200), 2.0, 2);
        const double alpha = inst.alpha0() + rng.uniform(0.01, 2.0);
        const double n1 = std::exp(rng.uniform(0.0, std::log(1e6)));
        const double n2 = n1 * std::exp(rng.uniform(0.05, 3.0));
        record(res, covariance_trace(inst, alpha, n2) < covariance_trace(inst, alpha, n1), "case " + std::to_string(k));
    }
    return res;
}

/// h_n >= 0 everywhere and h_n(c e_1) = 0.
inline SuiteResult h_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"h_n sign and e_1 zero"};
    RandomStream rng(stream_key(seed, "prop-h"));
    for (int k = 0; k < cases; ++k) {
        const int size = 2 + static_cast<int>(rng.uniform() * 200);
        const double n = std::exp(rng.uniform(std::log(3.0), std::log(1e8)));
        const double a = rng.uniform(0.0, std::log(n));
        const SpectralVector d(random_vector(rng, size, std::exp(rng.uniform(-4.0, 2.0))));
        const SpectralVector spike = SpectralVector(Eigen::VectorXd(rng.normal() * SpectralVector::basis(size, 1).values()));
        record(res, h_n(d, n, a) >= 0.0 && h_n(spike, n, a) == 0.0, "case " + std::to_string(k));
    }
    return res;
}

/// Shrinking epsilon never breaks self-similarity, and the first violation only moves later.
inline SuiteResult self_similar_suite(int cases, std::uint64_t seed) {
    SuiteResult res{"self-similarity epsilon monotonicity"};
    RandomStream rng(stream_key(seed, "prop-selfsim"));
    for (int k = 0; k < cases; ++k) {
        const int size = 64 + static_cast<int>(rng.uniform() * 400);
        const double beta = rng.uniform(0.2, 2.0);
        Eigen::VectorXd v(size);
        for (int i = 1; i <= size; ++i) {
            v(i - 1) = rng.uniform(0.0, 1.0) * std::pow(i, -0.5 - beta) * (rng.uniform() < 0.1 ? 0.0 : 1.0);
        }
        SelfSimilarSpec big;
        big.epsilon = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
        big.n0 = 1 + static_cast<int>(rng.uniform() * 10);
        big.rho = rng.uniform(2.0, 4.0);
        big.ball = {BallKind::Hyperrectangle, beta, rng.uniform(0.1, 2.0)};
        SelfSimilarSpec small = big;
        small.epsilon = big.epsilon * rng.uniform(0.0, 1.0);
        if (small.epsilon <= 0.0) {
            small.epsilon = big.epsilon * 1e-3;
        }
        const SpectralVector sv(v);
        const auto a = is_self_similar(sv, big);
        const auto b = is_self_similar(sv, small);
        bool ok = !a.holds || b.holds;
        if (a.first_violation && b.first_violation) {
            ok = ok && *b.first_violation >= *a.first_violation;
        }
        record(res, ok, "case " + std::to_string(k));
    }
    return res;
}

inline std::vector<SuiteResult> all_suites(int cases, std::uint64_t seed) {
    return {interpolation_suite(cases, seed), shrinkage_suite(cases, seed), trace_suite(cases, seed),
            h_suite(cases, seed), self_similar_suite(cases, seed)};
}

} // namespace ebip::testing
