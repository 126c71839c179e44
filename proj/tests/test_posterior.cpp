#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ebip/config.hpp"
#include "ebip/posterior.hpp"
#include "ebip/torus.hpp"

using namespace ebip;

namespace {

std::vector<FourierCoeff> two_plus_cos() { return {{{0}, {2.0, 0.0}}, {{1}, {0.5, 0.0}}, {{-1}, {0.5, 0.0}}}; }

TorusSpec example1(int K, double period) { return TorusSpec{1, 1, K, period, two_plus_cos(), {}}; }

// same spectrum and T, but forced through the dense code path
ProblemInstance densified(const ProblemInstance& inst) {
    return {inst.spectrum(), LinearOp::dense(inst.forward().to_dense()), inst.exponents(), "dense copy"};
}

Eigen::VectorXd random_vector(RandomStream& rng, int n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = scale * rng.normal();
    }
    return v;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

ProblemInstance random_dense_instance(RandomStream& rng, int n) {
    Eigen::MatrixXd t(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            t(i, j) = rng.normal() / n;
        }
        t(i, i) += 1.0;
    }
    return {Spectrum::polynomial(2.0, 1, n), LinearOp::dense(t), Exponents::from(0.0, 0.0), "random"};
}

} // namespace

TEST(SimulateData, SameSeedSameData) {
    const auto inst = diagonal_instance(64, 2.0, 1);
    const auto truth = SpectralVector::basis(64, 3);
    const auto a = simulate_data(inst, truth, 100.0, 42);
    const auto b = simulate_data(inst, truth, 100.0, 42);
    EXPECT_EQ(a.d.values(), b.d.values());
    EXPECT_NE(a.d.values(), simulate_data(inst, truth, 100.0, 43).d.values());
    EXPECT_EQ(a.truth.values(), truth.values());
    EXPECT_THROW(simulate_data(inst, truth, 0.0, 1), std::invalid_argument);
}

TEST(SimulateData, NoiseVarianceIsOneOverN) {
    const int size = 10000;
    const auto inst = diagonal_instance(size, 2.0, 1);
    const double n = 250.0;
    const auto data = simulate_data(inst, SpectralVector::zeros(size), n, 5);
    const double var = data.d.values().squaredNorm() / size;
    EXPECT_NEAR(var * n, 1.0, 0.05);
}

TEST(SimulateData, HugeNIsNoiseless) {
    const auto inst = build_example1(example1(16, 2.0 * M_PI));
    RandomStream rng(3);
    const SpectralVector truth(random_vector(rng, inst.size()));
    const auto data = simulate_data(inst, truth, 1e16, 9);
    const Eigen::VectorXd diff = data.d.values() - inst.forward().apply(truth.values());
    EXPECT_LE(diff.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(DataRealization, JsonRoundTrip) {
    const auto inst = diagonal_instance(16, 2.0, 1);
    const auto data = simulate_data(inst, SpectralVector::basis(16, 2), 1e3, 77);
    const auto back = data_from_json(Json::parse(to_json(data).dump()));
    EXPECT_EQ(back.d.values(), data.d.values());
    EXPECT_EQ(back.truth.values(), data.truth.values());
    EXPECT_EQ(back.n, data.n);
    EXPECT_EQ(back.seed, data.seed);
    Json bad = to_json(data);
    bad["extra"] = 1;
    EXPECT_THROW(data_from_json(bad), ConfigError);
}

TEST(PosteriorMeanDiagonal, Examples) {
    EXPECT_EQ(posterior_mean_diagonal(SpectralVector::zeros(10), 5.0, 0.3).values(), Eigen::VectorXd::Zero(10));
    for (double a : {0.0, 1.0, 4.0}) {
        EXPECT_DOUBLE_EQ(posterior_mean_diagonal(SpectralVector::basis(4, 1), 1.0, a).coeff(1), 0.5);
    }
    EXPECT_THROW(posterior_mean_diagonal(SpectralVector::zeros(2), -1.0, 0.0), std::invalid_argument);
}

TEST(PosteriorMeanM, DiagonalReductionAgainstDenseSolve) {
    RandomStream rng(12);
    for (const int d : {1, 2}) {
        const auto inst = diagonal_instance(512, 2.0, d);
        const auto dense = densified(inst);
        for (double alpha : {0.6, 1.0, 2.0}) {
            for (double n : {1e2, 1e5}) {
                const SpectralVector data(random_vector(rng, 512));
                const double alpha_tilde = (2.0 / d) * alpha - 0.5;
                const auto expect = posterior_mean_diagonal(data, n, alpha_tilde).values();
                EXPECT_LE(rel_err(posterior_mean_m(data, n, alpha, inst).values(), expect), 1e-10);
                EXPECT_LE(rel_err(posterior_mean_m(data, n, alpha, dense).values(), expect), 1e-10);
            }
        }
    }
}

TEST(PosteriorMeanM, ZeroDataAndLargeN) {
    const auto inst = build_example1(example1(32, 2.0 * M_PI));
    EXPECT_EQ(posterior_mean_m(SpectralVector::zeros(inst.size()), 10.0, 1.0, inst).values().norm(), 0.0);
    const auto diag = diagonal_instance(200, 2.0, 1);
    RandomStream rng(1);
    const SpectralVector d(random_vector(rng, 200));
    const auto m = posterior_mean_m(d, 1e12, 1.0, diag);
    for (int i = 1; i <= 10; ++i) {
        EXPECT_NEAR(m.coeff(i), d.coeff(i), 1e-6 * std::abs(d.coeff(i)));
    }
}

TEST(PosteriorMeanM, ShrinksData) {
    RandomStream rng(31);
    const auto inst = build_example1(example1(24, 2.0 * M_PI));
    for (int trial = 0; trial < 50; ++trial) {
        const SpectralVector d(random_vector(rng, inst.size(), rng.uniform(0.01, 10.0)));
        const double n = std::exp(rng.uniform(0.0, std::log(1e8)));
        const double alpha = rng.uniform(0.3, 3.0);
        EXPECT_LE(posterior_mean_m(d, n, alpha, inst).values().norm(), d.values().norm());
    }
}

TEST(PosteriorU, IdentityForwardIsScalarConjugacy) {
    const auto inst = diagonal_instance(128, 2.0, 1);
    const auto dense = densified(inst);
    RandomStream rng(2);
    const SpectralVector d(random_vector(rng, 128));
    const double alpha = 1.0;
    const double n = 300.0;
    const Eigen::VectorXd prior = inst.spectrum().lambda_pow(2.0 * alpha);
    Eigen::VectorXd expect(128);
    for (int i = 0; i < 128; ++i) {
        expect(i) = prior(i) * d.values()(i) / (prior(i) + 1.0 / n);
    }
    EXPECT_LE(rel_err(posterior_u(d, n, alpha, inst).mean.values(), expect), 1e-12);
    EXPECT_LE(rel_err(posterior_u(d, n, alpha, dense).mean.values(), expect), 1e-10);
}

TEST(PosteriorU, ZeroDataShrinksCovariance) {
    const auto inst = build_example1(example1(32, 2.0 * M_PI));
    const auto post = posterior_u(SpectralVector::zeros(inst.size()), 100.0, 1.0, inst);
    EXPECT_EQ(post.mean.values().norm(), 0.0);
    EXPECT_EQ(post.space, PosteriorSpace::U);
    EXPECT_LT(post.cov.trace(), inst.spectrum().lambda_pow(2.0).sum());
    const Eigen::MatrixXd c = post.cov.to_dense();
    EXPECT_EQ((c - c.transpose()).norm(), 0.0);
}

TEST(PosteriorU, PushForwardMatchesMSpaceMean) {
    RandomStream rng(99);
    const auto inst = build_example1(example1(128, 1.0));
    ASSERT_FALSE(inst.forward().is_diagonal());
    ASSERT_LE(inst.size(), 256);
    for (double alpha : {0.5, 1.0, 2.0}) {
        for (double n : {1e2, 1e4, 1e6}) {
            const SpectralVector d(random_vector(rng, inst.size()));
            const auto post = posterior_u(d, n, alpha, inst);
            const Eigen::VectorXd pushed = inst.forward().apply(post.mean.values());
            EXPECT_LE(rel_err(pushed, posterior_mean_m(d, n, alpha, inst).values()), 1e-10)
                << "alpha " << alpha << " n " << n;
        }
    }
    for (int trial = 0; trial < 10; ++trial) {
        const auto rand_inst = random_dense_instance(rng, 40);
        const SpectralVector d(random_vector(rng, 40));
        const auto post = posterior_u(d, 1e3, 1.0, rand_inst);
        EXPECT_LE(rel_err(rand_inst.forward().apply(post.mean.values()), posterior_mean_m(d, 1e3, 1.0, rand_inst).values()),
                  1e-10);
    }
}

TEST(SolveRegularized, Examples) {
    const auto inst = diagonal_instance(64, 2.0, 1);
    EXPECT_EQ(solve_regularized(inst, 1.0, 10.0, SpectralVector::zeros(64)).values().norm(), 0.0);
    RandomStream rng(4);
    const SpectralVector r(random_vector(rng, 64));
    const Eigen::VectorXd mu = inst.spectrum().lambda_pow(2.0);
    const auto u = solve_regularized(inst, 1.0, 10.0, r);
    for (int i = 0; i < 64; ++i) {
        EXPECT_NEAR(u.values()(i), r.values()(i) / (10.0 * mu(i) + 1.0), 1e-15);
    }
}

TEST(SolveRegularized, WeakFormHolds) {
    RandomStream rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const auto inst = random_dense_instance(rng, 48);
        const double alpha = 1.0;
        const double n = 50.0;
        const SpectralVector r(random_vector(rng, 48));
        const auto u = solve_regularized(inst, alpha, n, r);
        const Eigen::VectorXd half = inst.spectrum().lambda_pow(alpha);
        const Eigen::MatrixXd t = inst.forward().to_dense();
        const Eigen::VectorXd cu = half.cwiseProduct(t.transpose() * u.values());
        for (int k = 0; k < 10; ++k) {
            const Eigen::VectorXd v = random_vector(rng, 48);
            const Eigen::VectorXd cv = half.cwiseProduct(t.transpose() * v);
            const double b = n * cu.dot(cv) + u.values().dot(v);
            const double rhs = r.values().dot(v);
            EXPECT_NEAR(b, rhs, 1e-8 * std::max(std::abs(rhs), r.values().norm() * v.norm()));
        }
    }
}

TEST(CovarianceTrace, DiagonalFormula) {
    const auto inst = diagonal_instance(300, 2.0, 1);
    const Eigen::VectorXd mu = inst.spectrum().lambda_pow(3.0);
    double expect = 0;
    for (int i = 0; i < 300; ++i) {
        expect += mu(i) / (40.0 * mu(i) + 1.0);
    }
    EXPECT_NEAR(covariance_trace(inst, 1.5, 40.0), expect, 1e-13 * expect);
    EXPECT_LT(covariance_trace(inst, 1.5, 1e12), 1e-6);
}

TEST(CovarianceTrace, ExampleOneWithoutPotential) {
    const TorusSpec spec{1, 1, 64, 2.0 * M_PI, {}, {}};
    const auto inst = build_example1(spec);
    const double alpha = 0.8;
    const double n = 1e3;
    double expect = 0;
    for (const auto& mode : torus_basis(1, 64, 2.0 * M_PI)) {
        // T = rho^{-2}, C^alpha = rho^{-4 alpha}
        const double mu = std::pow(mode.rho_sq, -2.0 * alpha - 2.0);
        expect += mu / (n * mu + 1.0);
    }
    EXPECT_NEAR(covariance_trace(inst, alpha, n), expect, 1e-10 * expect);
    EXPECT_NEAR(covariance_trace(densified(inst), alpha, n), expect, 1e-10 * expect);
}

TEST(CovarianceTrace, StrictlyDecreasingInN) {
    const auto inst = build_example1(example1(32, 2.0 * M_PI));
    double previous = std::numeric_limits<double>::infinity();
    for (double n = 1.0; n <= 1e8; n *= 10.0) {
        const double tr = covariance_trace(inst, 1.0, n);
        EXPECT_LT(tr, previous);
        previous = tr;
    }
}

TEST(OperatorNormProbe, DiagonalClosedForm) {
    const auto inst = diagonal_instance(256, 2.0, 1, 1.0, 1.0);  // Delta = 2
    const double alpha = 1.5;
    const double s = 0.5;
    const Eigen::VectorXd lam = inst.spectrum().lambda_pow(1.0);
    const auto got = operator_norm_probe(inst, alpha, s, {1e-6, 1e3});
    const auto dense = operator_norm_probe(densified(inst), alpha, s, {1e3});
    double expect = 0;
    for (int i = 0; i < 256; ++i) {
        expect = std::max(expect, std::pow(lam(i), 2.0 * (2.5 - s)) / (1e3 * std::pow(lam(i), 5.0) + 1.0));
    }
    EXPECT_NEAR(got[1], expect, 1e-12 * expect);
    EXPECT_NEAR(dense[0], expect, 1e-7 * expect);
    // identity dominated: the largest lambda power
    EXPECT_NEAR(got[0], std::pow(lam(0), 4.0), 1e-5);
    EXPECT_THROW(operator_norm_probe(inst, alpha, 2.0, {1.0}), std::invalid_argument);
}

TEST(OperatorNormProbe, ExampleOneSlope) {
    const auto inst = build_example1(example1(32, 2.0 * M_PI));
    const double alpha = 1.0;
    const double s = 0.5;
    const std::vector<double> ns{1e2, 1e3, 1e4, 1e5, 1e6};
    const auto norms = operator_norm_probe(inst, alpha, s, ns);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const double x = std::log(ns[k]);
        const double y = std::log(norms[k]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double m = static_cast<double>(ns.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double a = alpha + inst.exponents().delta - 1.0;
    EXPECT_LE(slope, -1.0 + s / a + 0.05);
}

TEST(KLCheck, TruthGivesZero) {
    const auto inst = diagonal_instance(32, 2.0, 1);
    const auto u = SpectralVector::basis(32, 4);
    const auto rep = kl_ball_check(inst, u, u, 100.0, 1000, 1);
    EXPECT_EQ(rep.kl_mean, 0.0);
    EXPECT_EQ(rep.kl_var, 0.0);
    EXPECT_EQ(rep.target_mean, 0.0);
    EXPECT_THROW(kl_ball_check(inst, u, u, 100.0, 999, 1), std::invalid_argument);
}

TEST(KLCheck, MomentsMatchClosedForm) {
    const auto inst = build_example1(example1(16, 2.0 * M_PI));
    RandomStream rng(8);
    const SpectralVector truth(random_vector(rng, inst.size(), 0.3));
    const SpectralVector u(truth.values() + random_vector(rng, inst.size(), 0.05));
    const double n = 1e3;
    const auto rep = kl_ball_check(inst, u, truth, n, 10000, 21);
    const double dist = (inst.forward().apply(u.values()) - inst.forward().apply(truth.values())).squaredNorm();
    EXPECT_DOUBLE_EQ(rep.target_mean, 0.5 * n * dist);
    EXPECT_DOUBLE_EQ(rep.target_var, n * dist);
    EXPECT_LE(std::abs(rep.kl_mean - rep.target_mean), 3.0 * std::sqrt(rep.target_var / 10000));
    EXPECT_LE(std::abs(rep.z_var), 5.0);
    const auto doubled = kl_ball_check(inst, u, truth, 2 * n, 1000, 21);
    EXPECT_EQ(doubled.target_mean, 2.0 * kl_ball_check(inst, u, truth, n, 1000, 21).target_mean);
}

TEST(PosteriorSample, DegenerateCovarianceReturnsMean) {
    RandomStream rng(6);
    const SpectralVector mean(random_vector(rng, 20));
    for (const auto& cov : {LinearOp::diagonal(Eigen::VectorXd::Constant(20, 1e-30), true),
                            LinearOp::dense(1e-30 * Eigen::MatrixXd::Identity(20, 20), true)}) {
        const auto draws = posterior_sample({mean, cov, PosteriorSpace::U}, 5, 3);
        for (const auto& s : draws) {
            EXPECT_LE((s.values() - mean.values()).lpNorm<Eigen::Infinity>(), 1e-14);
        }
    }
}

TEST(PosteriorSample, DiagonalVarianceAndDeterminism) {
    Eigen::VectorXd var(6);
    var << 4.0, 1.0, 0.25, 2.0, 0.01, 9.0;
    const PosteriorGaussian post{SpectralVector::zeros(6), LinearOp::diagonal(var, true), PosteriorSpace::U};
    const auto draws = posterior_sample(post, 10000, 12);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(6);
    for (const auto& s : draws) {
        acc += s.values().cwiseAbs2();
    }
    acc /= 10000.0;
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(acc(i) / var(i), 1.0, 0.05);
    }
    const auto again = posterior_sample(post, 3, 12);
    EXPECT_EQ(again[2].values(), draws[2].values());
    EXPECT_THROW(posterior_sample(post, 0, 1), std::invalid_argument);
}

TEST(PosteriorSample, DenseCovarianceFromPosterior) {
    const auto inst = build_example1(example1(8, 2.0 * M_PI));
    RandomStream rng(5);
    const SpectralVector d(random_vector(rng, inst.size()));
    const auto post = posterior_u(d, 50.0, 1.0, inst);
    const auto draws = posterior_sample(post, 20000, 4);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(inst.size());
    for (const auto& s : draws) {
        mean += s.values();
    }
    mean /= 20000.0;
    const Eigen::VectorXd sd = post.cov.to_dense().diagonal().cwiseSqrt();
    for (int i = 0; i < inst.size(); ++i) {
        EXPECT_NEAR(mean(i), post.mean.values()(i), 5.0 * sd(i) / std::sqrt(20000.0));
    }
}
