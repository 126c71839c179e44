#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ebip/error.hpp"
#include "ebip/random.hpp"
#include "ebip/spectrum.hpp"

namespace ebip {

/// First N coefficients of an element of H in the eigenbasis of C. Entries
/// past N are treated as exactly zero. coeff() is 1-based; values() exposes
/// the 0-based Eigen storage for linear algebra.
class SpectralVector {
public:
    explicit SpectralVector(Eigen::VectorXd values) : values_(std::move(values)) {
        require(values_.size() >= 1, "SpectralVector: length must be >= 1");
        require(values_.allFinite(), "SpectralVector: entries must be finite");
    }

    explicit SpectralVector(const std::vector<double>& values)
        : SpectralVector(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                           static_cast<Eigen::Index>(values.size()))) {}

    static SpectralVector zeros(int n) { return SpectralVector(Eigen::VectorXd::Zero(n)); }

    static SpectralVector basis(int n, int k) {
        require(k >= 1 && k <= n, "SpectralVector: basis index out of range");
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        v(k - 1) = 1.0;
        return SpectralVector(std::move(v));
    }

    int size() const { return static_cast<int>(values_.size()); }
    double coeff(int i) const { return values_(i - 1); }
    const Eigen::VectorXd& values() const { return values_; }

    std::vector<double> to_std() const { return {values_.data(), values_.data() + values_.size()}; }

    friend bool operator==(const SpectralVector& a, const SpectralVector& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Eigen::VectorXd values_;
};

enum class BallKind { Sobolev, Hyperrectangle };

struct BallSpec {
    BallKind kind = BallKind::Sobolev;
    double beta = 1.0;
    double radius = 1.0;

    void validate() const {
        require(beta > 0.0, "BallSpec: beta must be positive");
        require(radius > 0.0, "BallSpec: radius must be positive");
    }
};

/// Parameters of the self-similarity condition on a hyperrectangle ball:
/// sum_{i=N'}^{floor(rho N')} v_i^2 >= epsilon * R * N'^(-2 beta) for N' >= n0.
struct SelfSimilarSpec {
    double epsilon = 0.1;
    int n0 = 1;
    double rho = 2.0;
    BallSpec ball{BallKind::Hyperrectangle, 1.0, 1.0};

    void validate() const {
        require(epsilon > 0.0, "SelfSimilarSpec: epsilon must be positive");
        require(n0 >= 1, "SelfSimilarSpec: n0 must be >= 1");
        require(rho >= 2.0, "SelfSimilarSpec: rho must be >= 2");
        require(ball.kind == BallKind::Hyperrectangle, "SelfSimilarSpec: ball must be a hyperrectangle");
        ball.validate();
    }
};

struct SelfSimilarCertificate {
    bool holds = false;
    std::optional<int> first_violation;
};

inline double ell2_norm(const SpectralVector& v) { return v.values().norm(); }

inline double weighted_norm(const SpectralVector& v, double beta, BallKind kind) {
    require(beta >= 0.0, "weighted_norm: beta must be non-negative");
    if (kind == BallKind::Sobolev) {
        double sum = 0.0;
        for (int i = 1; i <= v.size(); ++i) {
            const double x = v.coeff(i);
            sum += std::pow(static_cast<double>(i), 2.0 * beta) * x * x;
        }
        return std::sqrt(sum);
    }
    double sup = 0.0;
    for (int i = 1; i <= v.size(); ++i) {
        const double x = v.coeff(i);
        sup = std::max(sup, std::pow(static_cast<double>(i), 1.0 + 2.0 * beta) * x * x);
    }
    return std::sqrt(sup);
}

/// Ball membership uses the squared norm against R, matching the set
/// definitions {sum i^{2beta} v_i^2 <= R} and {sup i^{1+2beta} v_i^2 <= R}.
inline bool in_ball(const SpectralVector& v, const BallSpec& ball) {
    ball.validate();
    const double norm = weighted_norm(v, ball.beta, ball.kind);
    return norm * norm <= ball.radius;
}

/// ||v||_{H^t} = ||C^{-t/2} v|| = sqrt(sum lambda_i^{-2t} v_i^2).
inline double hilbert_scale_norm(const SpectralVector& v, double t, const Spectrum& spec) {
    require(spec.size() >= v.size(), "hilbert_scale_norm: spectrum shorter than vector");
    double sum = 0.0;
    for (int i = 1; i <= v.size(); ++i) {
        const double x = v.coeff(i);
        sum += std::pow(spec.lambda_sq(i), -t) * x * x;
    }
    return std::sqrt(sum);
}

inline SelfSimilarCertificate is_self_similar(const SpectralVector& v, const SelfSimilarSpec& spec) {
    spec.validate();
    const int n = v.size();
    require(spec.rho * spec.n0 <= n, "is_self_similar: no window fits (rho * n0 > N)");

    // Tail sums accumulated from the end keep small late windows accurate.
    std::vector<double> tail(static_cast<std::size_t>(n) + 2, 0.0);
    for (int i = n; i >= 1; --i) {
        const double x = v.coeff(i);
        tail[static_cast<std::size_t>(i)] = tail[static_cast<std::size_t>(i) + 1] + x * x;
    }
    const int last = static_cast<int>(std::floor(n / spec.rho));
    for (int start = spec.n0; start <= last; ++start) {
        const int stop = static_cast<int>(std::floor(spec.rho * start));
        const double window = tail[static_cast<std::size_t>(start)] - tail[static_cast<std::size_t>(stop) + 1];
        const double bound = spec.epsilon * spec.ball.radius * std::pow(static_cast<double>(start), -2.0 * spec.ball.beta);
        if (!(window >= bound)) {
            return {false, start};
        }
    }
    return {true, std::nullopt};
}

enum class TruthFamily { PolynomialDecay, RandomSelfSimilar, SingleSpike };

/// Margin added to the decay exponent so the truth lies strictly inside the
/// Sobolev ball of order p*gamma/d.
inline constexpr double kTruthDecayMargin = 0.01;

inline SpectralVector make_truth(TruthFamily family, double gamma, double p, int d, int n, std::uint64_t seed) {
    require(gamma >= 1.0, "make_truth: gamma must be >= 1");
    require(n >= 16, "make_truth: N must be >= 16");
    require(p > 0.0 && d >= 1, "make_truth: need p > 0 and d >= 1");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    const double exponent = 0.5 + p * gamma / d + kTruthDecayMargin;
    switch (family) {
    case TruthFamily::SingleSpike:
        u(0) = 1.0;
        break;
    case TruthFamily::PolynomialDecay:
        for (int i = 1; i <= n; ++i) {
            u(i - 1) = std::pow(static_cast<double>(i), -exponent);
        }
        break;
    case TruthFamily::RandomSelfSimilar: {
        RandomStream rng(stream_key(seed, "truth"));
        for (int i = 1; i <= n; ++i) {
            const double magnitude = rng.uniform(0.5, 1.0);
            u(i - 1) = rng.sign() * magnitude * std::pow(static_cast<double>(i), -exponent);
        }
        break;
    }
    }
    return SpectralVector(std::move(u));
}

} // namespace ebip
