#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ebip/error.hpp"
#include "ebip/linear_op.hpp"
#include "ebip/operators.hpp"
#include "ebip/random.hpp"
#include "ebip/sequence.hpp"

namespace ebip {

struct DataRealization {
    SpectralVector d;
    double n = 0.0;
    std::uint64_t seed = 0;
    SpectralVector truth;
};

enum class PosteriorSpace { U, M };

struct PosteriorGaussian {
    SpectralVector mean;
    LinearOp cov;
    PosteriorSpace space = PosteriorSpace::U;
};

inline Eigen::VectorXd standard_normal_vector(RandomStream& rng, Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = rng.normal();
    }
    return out;
}

/// d = T u + n^{-1/2} eta.
inline DataRealization simulate_data(const ProblemInstance& instance, const SpectralVector& u_truth, double n,
                                     std::uint64_t seed) {
    require(n > 0.0, "simulate_data: n must be > 0");
    require(u_truth.size() == instance.size(), "simulate_data: truth length differs from instance size");
    RandomStream rng(stream_key(seed, "noise"));
    const Eigen::VectorXd eta = standard_normal_vector(rng, instance.size());
    Eigen::VectorXd d = instance.forward().apply(u_truth.values()) + eta / std::sqrt(n);
    return {SpectralVector(std::move(d)), n, seed, u_truth};
}

/// m_i = n d_i / (i^{1+2a} + n).
inline SpectralVector posterior_mean_diagonal(const SpectralVector& d, double n, double alpha_tilde) {
    require(n > 0.0, "posterior_mean_diagonal: n must be > 0");
    require(alpha_tilde >= 0.0, "posterior_mean_diagonal: alpha_tilde must be >= 0");
    Eigen::VectorXd out(d.size());
    for (int i = 1; i <= d.size(); ++i) {
        out(i - 1) = n * d.coeff(i) / (std::pow(static_cast<double>(i), 1.0 + 2.0 * alpha_tilde) + n);
    }
    return SpectralVector(std::move(out));
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(what) + ": factorization failed, matrix is not SPD");
    }
    return llt;
}

inline void check_posterior_args(const ProblemInstance& instance, double alpha, double n, const char* what) {
    require(n > 0.0, std::string(what) + ": n must be > 0");
    require(alpha > instance.alpha0(), std::string(what) + ": alpha must exceed alpha_0");
}

} // namespace detail

/// M (M + I/n)^{-1} d.
inline SpectralVector posterior_mean_m(const SpectralVector& d, double n, double alpha, const ProblemInstance& instance) {
    detail::check_posterior_args(instance, alpha, n, "posterior_mean_m");
    require(d.size() == instance.size(), "posterior_mean_m: data length differs from instance size");
    const LinearOp m = make_M(instance, alpha);
    if (m.is_diagonal()) {
        const Eigen::ArrayXd mu = m.diagonal_values().array();
        return SpectralVector(Eigen::VectorXd(mu * d.values().array() / (mu + 1.0 / n)));
    }
    Eigen::MatrixXd f = m.matrix();
    f.diagonal().array() += 1.0 / n;
    const Eigen::VectorXd x = detail::factor_spd(f, "posterior_mean_m").solve(d.values());
    return SpectralVector(Eigen::VectorXd(m.matrix() * x));
}

/// Conjugate posterior for u: mean C^a T^T F^{-1} d, covariance C^a - C^a T^T F^{-1} T C^a
/// with F = T C^a T^T + I/n.
inline PosteriorGaussian posterior_u(const SpectralVector& d, double n, double alpha, const ProblemInstance& instance) {
    detail::check_posterior_args(instance, alpha, n, "posterior_u");
    require(d.size() == instance.size(), "posterior_u: data length differs from instance size");
    const Eigen::VectorXd prior = instance.spectrum().lambda_pow(2.0 * alpha);
    const LinearOp& t = instance.forward();
    if (t.is_diagonal()) {
        const Eigen::ArrayXd td = t.diagonal_values().array();
        const Eigen::ArrayXd pa = prior.array();
        const Eigen::ArrayXd f = td * td * pa + 1.0 / n;
        Eigen::VectorXd mean = pa * td * d.values().array() / f;
        Eigen::VectorXd cov = pa / (n * td * td * pa + 1.0);
        return {SpectralVector(std::move(mean)), LinearOp::diagonal(std::move(cov), true), PosteriorSpace::U};
    }
    const Eigen::MatrixXd& tm = t.matrix();
    const Eigen::MatrixXd k = prior.asDiagonal() * tm.transpose();
    Eigen::MatrixXd f = make_M(instance, alpha).matrix();
    f.diagonal().array() += 1.0 / n;
    const auto llt = detail::factor_spd(f, "posterior_u");
    Eigen::VectorXd mean = k * llt.solve(d.values());
    Eigen::MatrixXd cov = -k * llt.solve(k.transpose());
    cov.diagonal() += prior;
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {SpectralVector(std::move(mean)), LinearOp::dense(std::move(cov), true), PosteriorSpace::U};
}

/// Solves (n M + I) u = r and checks the residual.
inline SpectralVector solve_regularized(const ProblemInstance& instance, double alpha, double n, const SpectralVector& r) {
    detail::check_posterior_args(instance, alpha, n, "solve_regularized");
    require(r.size() == instance.size(), "solve_regularized: rhs length differs from instance size");
    const LinearOp m = make_M(instance, alpha);
    Eigen::VectorXd u;
    Eigen::VectorXd residual;
    if (m.is_diagonal()) {
        const Eigen::ArrayXd a = n * m.diagonal_values().array() + 1.0;
        u = r.values().array() / a;
        residual = (a * u.array()).matrix() - r.values();
    } else {
        Eigen::MatrixXd a = n * m.matrix();
        a.diagonal().array() += 1.0;
        u = detail::factor_spd(a, "solve_regularized").solve(r.values());
        residual = a * u - r.values();
    }
    const double tol = 1e-8 * r.values().norm();
    if (residual.norm() > tol) {
        throw NumericalError("solve_regularized: residual " + std::to_string(residual.norm()) +
                             " exceeds 1e-8 * ||r||");
    }
    return SpectralVector(std::move(u));
}

/// Tr[(n M + I)^{-1} M] from the eigenvalues of M.
inline double covariance_trace(const ProblemInstance& instance, double alpha, double n) {
    detail::check_posterior_args(instance, alpha, n, "covariance_trace");
    const LinearOp m = make_M(instance, alpha);
    Eigen::VectorXd mu;
    if (m.is_diagonal()) {
        mu = m.diagonal_values();
    } else {
        mu = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.matrix(), Eigen::EigenvaluesOnly).eigenvalues();
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double v = std::max(mu(i), 0.0);
        sum += v / (n * v + 1.0);
    }
    return sum;
}

/// ||C^{(a-s)/2} (n M + I)^{-1} C^{(a-s)/2}||, a = alpha + Delta - 1, for each n.
inline std::vector<double> operator_norm_probe(const ProblemInstance& instance, double alpha, double s,
                                               const std::vector<double>& n_list) {
    require(instance.alpha0() < s && s < alpha, "operator_norm_probe: need alpha_0 < s < alpha");
    const double a = alpha + instance.exponents().delta - 1.0;
    const Eigen::VectorXd side = instance.spectrum().lambda_pow(a - s);
    const LinearOp m = make_M(instance, alpha);
    std::vector<double> out;
    for (double n : n_list) {
        require(n > 0.0, "operator_norm_probe: n must be > 0");
        if (m.is_diagonal()) {
            const Eigen::ArrayXd v = side.array().square() / (n * m.diagonal_values().array() + 1.0);
            out.push_back(v.maxCoeff());
            continue;
        }
        Eigen::MatrixXd f = n * m.matrix();
        f.diagonal().array() += 1.0;
        const auto llt = detail::factor_spd(f, "operator_norm_probe");
        const auto res = symmetric_operator_norm(static_cast<int>(side.size()), [&](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(side.cwiseProduct(llt.solve(side.cwiseProduct(x))));
        });
        if (!res.converged) {
            throw NumericalError("operator_norm_probe: power iteration did not converge at n = " + std::to_string(n));
        }
        out.push_back(res.value);
    }
    return out;
}

struct KLReport {
    double kl_mean = 0.0;
    double kl_var = 0.0;
    double target_mean = 0.0;
    double target_var = 0.0;
    double z_mean = 0.0;
    double z_var = 0.0;
    int mc = 0;
};

/// Monte Carlo moments of -log(dmu_u / dmu_truth) under data drawn from the truth,
/// against (n/2)||T(u - u')||^2 and n||T(u - u')||^2.
inline KLReport kl_ball_check(const ProblemInstance& instance, const SpectralVector& u, const SpectralVector& u_truth,
                              double n, int mc, std::uint64_t seed) {
    require(mc >= 1000, "kl_ball_check: mc must be >= 1000");
    require(n > 0.0, "kl_ball_check: n must be > 0");
    require(u.size() == instance.size() && u_truth.size() == instance.size(), "kl_ball_check: length mismatch");
    const Eigen::VectorXd tu = instance.forward().apply(u.values());
    const Eigen::VectorXd tt = instance.forward().apply(u_truth.values());
    const double dist_sq = (tu - tt).squaredNorm();
    KLReport rep;
    rep.mc = mc;
    rep.target_mean = 0.5 * n * dist_sq;
    rep.target_var = n * dist_sq;
    double mean = 0.0;
    double m2 = 0.0;
    const double scale = 1.0 / std::sqrt(n);
    for (int k = 0; k < mc; ++k) {
        RandomStream rng(stream_key(seed, "kl-draw", n, static_cast<std::uint64_t>(k)));
        const Eigen::VectorXd d = tt + scale * standard_normal_vector(rng, tt.size());
        const double value = 0.5 * n * ((d - tu).squaredNorm() - (d - tt).squaredNorm());
        const double delta = value - mean;
        mean += delta / (k + 1);
        m2 += delta * (value - mean);
    }
    rep.kl_mean = mean;
    rep.kl_var = m2 / (mc - 1);
    if (rep.target_var > 0.0) {
        rep.z_mean = (rep.kl_mean - rep.target_mean) / std::sqrt(rep.target_var / mc);
        rep.z_var = (rep.kl_var - rep.target_var) / (rep.target_var * std::sqrt(2.0 / (mc - 1)));
    }
    return rep;
}

/// mean + V sqrt(Lambda) xi from the eigendecomposition of the covariance.
/// Eigenvalues down to -1e-12 lambda_max are treated as roundoff and clipped.
inline std::vector<SpectralVector> posterior_sample(const PosteriorGaussian& post, int count, std::uint64_t seed) {
    require(count >= 1, "posterior_sample: count must be >= 1");
    const Eigen::Index n = post.mean.size();
    require(post.cov.size() == n, "posterior_sample: covariance dimension mismatch");
    Eigen::MatrixXd factor;
    Eigen::VectorXd diag_factor;
    if (post.cov.is_diagonal()) {
        diag_factor = post.cov.diagonal_values().cwiseMax(0.0).cwiseSqrt();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.cov.matrix());
        if (eig.info() != Eigen::Success) {
            throw NumericalError("posterior_sample: eigendecomposition failed");
        }
        Eigen::VectorXd ev = eig.eigenvalues();
        const double top = std::max(ev.maxCoeff(), 0.0);
        if (ev.minCoeff() < -1e-12 * top) {
            throw NumericalError("posterior_sample: covariance has a negative eigenvalue beyond roundoff");
        }
        factor = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    std::vector<SpectralVector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        RandomStream rng(stream_key(seed, "posterior-sample", 0.0, static_cast<std::uint64_t>(k)));
        const Eigen::VectorXd xi = standard_normal_vector(rng, n);
        Eigen::VectorXd draw = post.cov.is_diagonal() ? Eigen::VectorXd(post.mean.values() + diag_factor.cwiseProduct(xi))
                                                      : Eigen::VectorXd(post.mean.values() + factor * xi);
        out.emplace_back(std::move(draw));
    }
    return out;
}

} // namespace ebip
