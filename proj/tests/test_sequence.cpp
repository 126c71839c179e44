#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ebip/random.hpp"
#include "ebip/sequence.hpp"

using namespace ebip;

namespace {

SpectralVector vec(std::vector<double> v) { return SpectralVector(v); }

// independent window scan, recomputing each window sum directly
std::optional<int> naive_first_violation(const std::vector<double>& v, double eps, double r, double beta, int n0,
                                         double rho) {
    const int n = static_cast<int>(v.size());
    for (int s = n0; s <= static_cast<int>(std::floor(n / rho)); ++s) {
        long double sum = 0;
        for (int i = s; i <= static_cast<int>(std::floor(rho * s)); ++i) {
            sum += static_cast<long double>(v[i - 1]) * v[i - 1];
        }
        if (sum < eps * r * std::pow(s, -2.0 * beta)) {
            return s;
        }
    }
    return std::nullopt;
}

} // namespace

TEST(SpectralVector, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(SpectralVector(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(vec({1.0, NAN}), std::invalid_argument);
    EXPECT_THROW(vec({INFINITY}), std::invalid_argument);
}

TEST(SpectralVector, OneBasedAccess) {
    const auto v = vec({3.0, 4.0, 5.0});
    EXPECT_EQ(v.coeff(1), 3.0);
    EXPECT_EQ(v.coeff(3), 5.0);
    EXPECT_EQ(SpectralVector::basis(4, 2).coeff(2), 1.0);
}

TEST(Ell2Norm, Examples) {
    EXPECT_EQ(ell2_norm(vec({0, 0, 0})), 0.0);
    EXPECT_DOUBLE_EQ(ell2_norm(vec({3, 4})), 5.0);
    std::vector<double> v(1000);
    double sum = 0;
    for (int i = 1; i <= 1000; ++i) {
        v[i - 1] = 1.0 / i;
        sum += 1.0 / (static_cast<double>(i) * i);
    }
    EXPECT_NEAR(ell2_norm(vec(v)), std::sqrt(sum), 1e-14);
}

TEST(WeightedNorm, Examples) {
    for (double beta : {0.0, 0.5, 2.0}) {
        EXPECT_DOUBLE_EQ(weighted_norm(vec({1, 0, 0}), beta, BallKind::Sobolev), 1.0);
        EXPECT_DOUBLE_EQ(weighted_norm(vec({1, 0, 0}), beta, BallKind::Hyperrectangle), 1.0);
    }
    EXPECT_DOUBLE_EQ(weighted_norm(vec({0, 1}), 1.0, BallKind::Sobolev), 2.0);
    const double beta = 0.7;
    std::vector<double> v(500);
    for (int i = 1; i <= 500; ++i) {
        v[i - 1] = std::pow(i, -(0.5 + beta));
    }
    EXPECT_NEAR(weighted_norm(vec(v), beta, BallKind::Hyperrectangle), 1.0, 1e-12);
    EXPECT_THROW(weighted_norm(vec(v), -0.1, BallKind::Sobolev), std::invalid_argument);
}

TEST(InBall, Examples) {
    EXPECT_TRUE(in_ball(vec({0, 0}), {BallKind::Sobolev, 1.0, 0.1}));
    EXPECT_TRUE(in_ball(vec({0, 0}), {BallKind::Hyperrectangle, 3.0, 0.1}));
    EXPECT_FALSE(in_ball(vec({1, 0}), {BallKind::Sobolev, 1.0, 0.5}));
    std::vector<double> v(10000);
    long double sum = 0;
    for (int i = 1; i <= 10000; ++i) {
        v[i - 1] = 1.0 / i;
        sum += std::pow(static_cast<long double>(i), -1.5L);
    }
    EXPECT_EQ(in_ball(vec(v), {BallKind::Sobolev, 0.25, 2.0}), sum <= 2.0L);
    EXPECT_EQ(in_ball(vec(v), {BallKind::Sobolev, 0.25, 3.0}), sum <= 3.0L);
}

TEST(HilbertScaleNorm, Examples) {
    const Spectrum spec = Spectrum::polynomial(1.0, 1, 50);
    RandomStream rng(11);
    std::vector<double> v(50);
    for (auto& x : v) {
        x = rng.normal();
    }
    EXPECT_NEAR(hilbert_scale_norm(vec(v), 0.0, spec), ell2_norm(vec(v)), 1e-14);
    const double lam7 = std::sqrt(spec.lambda_sq(7));
    EXPECT_NEAR(hilbert_scale_norm(SpectralVector::basis(50, 7), 1.3, spec), std::pow(lam7, -1.3), 1e-12);
    double sum = 0;
    for (int i = 1; i <= 50; ++i) {
        sum += static_cast<double>(i) * i * v[i - 1] * v[i - 1];
    }
    EXPECT_NEAR(hilbert_scale_norm(vec(v), 1.0, spec), std::sqrt(sum), 1e-10 * std::sqrt(sum));
}

TEST(HilbertScaleNorm, MatchesSobolevWhenConstantsAreOne) {
    const double p = 2.0;
    const int d = 3;
    const Spectrum spec = Spectrum::polynomial(p, d, 200);
    RandomStream rng(5);
    std::vector<double> v(200);
    for (auto& x : v) {
        x = rng.normal();
    }
    for (double gamma : {0.5, 1.0, 2.5}) {
        const double a = hilbert_scale_norm(vec(v), gamma, spec);
        const double b = weighted_norm(vec(v), p * gamma / d, BallKind::Sobolev);
        EXPECT_NEAR(a, b, 1e-12 * b);
    }
}

TEST(SelfSimilar, ZeroVectorFailsAtN0) {
    SelfSimilarSpec spec{0.1, 3, 2.0, {BallKind::Hyperrectangle, 1.0, 1.0}};
    const auto cert = is_self_similar(SpectralVector::zeros(64), spec);
    EXPECT_FALSE(cert.holds);
    ASSERT_TRUE(cert.first_violation.has_value());
    EXPECT_EQ(*cert.first_violation, 3);
}

TEST(SelfSimilar, PolynomialSequenceHolds) {
    const double beta = 1.0;
    std::vector<double> v(4096);
    for (int i = 1; i <= 4096; ++i) {
        v[i - 1] = std::pow(i, -(0.5 + beta));
    }
    // window sum >= integral from N' to 2N'+1 of x^{-3} ~ 0.375 N'^{-2}
    SelfSimilarSpec spec{0.1, 1, 2.0, {BallKind::Hyperrectangle, beta, 1.0}};
    const auto cert = is_self_similar(vec(v), spec);
    EXPECT_TRUE(cert.holds);
    EXPECT_FALSE(naive_first_violation(v, 0.1, 1.0, beta, 1, 2.0).has_value());
}

TEST(SelfSimilar, TruncatedSequenceFailsPastSupport) {
    const int n0 = 5;
    std::vector<double> v(100, 0.0);
    for (int i = 1; i <= 2 * n0; ++i) {
        v[i - 1] = std::pow(i, -1.5);
    }
    SelfSimilarSpec spec{0.05, n0, 2.0, {BallKind::Hyperrectangle, 1.0, 1.0}};
    const auto cert = is_self_similar(vec(v), spec);
    const auto oracle = naive_first_violation(v, 0.05, 1.0, 1.0, n0, 2.0);
    ASSERT_TRUE(oracle.has_value());
    ASSERT_TRUE(cert.first_violation.has_value());
    EXPECT_EQ(*cert.first_violation, *oracle);
    EXPECT_EQ(*oracle, 2 * n0 + 1);
}

TEST(SelfSimilar, RejectsEmptyWindowRange) {
    SelfSimilarSpec spec{0.1, 10, 2.0, {BallKind::Hyperrectangle, 1.0, 1.0}};
    EXPECT_THROW(is_self_similar(SpectralVector::zeros(19), spec), std::invalid_argument);
    EXPECT_NO_THROW(is_self_similar(SpectralVector::zeros(20), spec));
}

TEST(SelfSimilar, AgreesWithNaiveScanOnRandomInputs) {
    RandomStream rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 32 + static_cast<int>(rng.uniform() * 200);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) {
            v[i - 1] = rng.normal() * std::pow(i, -1.2) * (rng.uniform() < 0.1 ? 0.0 : 1.0);
        }
        const double eps = rng.uniform(0.01, 0.5);
        const double rho = rng.uniform(2.0, 3.5);
        const int n0 = 1 + static_cast<int>(rng.uniform() * 5);
        SelfSimilarSpec spec{eps, n0, rho, {BallKind::Hyperrectangle, 0.8, 1.0}};
        const auto cert = is_self_similar(vec(v), spec);
        EXPECT_EQ(cert.first_violation, naive_first_violation(v, eps, 1.0, 0.8, n0, rho));
    }
}

TEST(MakeTruth, Families) {
    const auto spike = make_truth(TruthFamily::SingleSpike, 1.0, 2.0, 2, 16, 0);
    EXPECT_EQ(spike, SpectralVector::basis(16, 1));

    const auto poly = make_truth(TruthFamily::PolynomialDecay, 1.0, 2.0, 2, 16, 0);
    EXPECT_DOUBLE_EQ(poly.coeff(1), 1.0);
    EXPECT_DOUBLE_EQ(poly.coeff(2), std::pow(2.0, -1.51));
    EXPECT_DOUBLE_EQ(poly.coeff(3), std::pow(3.0, -1.51));
    EXPECT_DOUBLE_EQ(poly.coeff(4), std::pow(4.0, -1.51));

    const auto a = make_truth(TruthFamily::RandomSelfSimilar, 1.0, 2.0, 1, 256, 42);
    const auto b = make_truth(TruthFamily::RandomSelfSimilar, 1.0, 2.0, 1, 256, 42);
    const auto c = make_truth(TruthFamily::RandomSelfSimilar, 1.0, 2.0, 1, 256, 43);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == c);
    for (int i = 1; i <= 256; ++i) {
        const double env = std::pow(i, -(0.5 + 2.0 + 0.01));
        EXPECT_GE(std::abs(a.coeff(i)), 0.5 * env * (1 - 1e-15));
        EXPECT_LE(std::abs(a.coeff(i)), env * (1 + 1e-15));
    }
}

TEST(MakeTruth, RejectsBadArguments) {
    EXPECT_THROW(make_truth(TruthFamily::PolynomialDecay, 0.5, 2.0, 2, 16, 0), std::invalid_argument);
    EXPECT_THROW(make_truth(TruthFamily::PolynomialDecay, 1.0, 2.0, 2, 15, 0), std::invalid_argument);
}

TEST(RandomStream, DeterministicAndKeyed) {
    RandomStream a(stream_key(1, "noise", 100.0, 3));
    RandomStream b(stream_key(1, "noise", 100.0, 3));
    RandomStream c(stream_key(1, "noise", 100.0, 4));
    for (int k = 0; k < 10; ++k) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        EXPECT_NE(x, c.normal());
    }
}

TEST(RandomStream, NormalMoments) {
    RandomStream rng(7);
    double s = 0;
    double s2 = 0;
    const int m = 200000;
    for (int k = 0; k < m; ++k) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    EXPECT_NEAR(s / m, 0.0, 0.01);
    EXPECT_NEAR(s2 / m, 1.0, 0.01);
}
