#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ebip/error.hpp"
#include "ebip/linear_op.hpp"
#include "ebip/random.hpp"
#include "ebip/sequence.hpp"
#include "ebip/spectrum.hpp"

namespace ebip {

/// Structural exponents: noise smoothness beta, forward smoothing ell,
/// combined exponent Delta = 2 ell - beta + 1 and truth regularity gamma.
struct Exponents {
    double beta = 0.0;
    double ell = 0.0;
    double delta = 1.0;
    double gamma = 1.0;

    static Exponents from(double beta, double ell, double gamma = 1.0) {
        return {beta, ell, 2.0 * ell - beta + 1.0, gamma};
    }
};

/// Whitened forward map T in the eigenbasis of C together with the prior
/// spectrum and exponents, at a fixed truncation level.
class ProblemInstance {
public:
    ProblemInstance(Spectrum spectrum, LinearOp forward, Exponents exponents, std::string label = {})
        : spectrum_(std::move(spectrum)), forward_(std::move(forward)), exponents_(exponents),
          label_(std::move(label)) {
        require(forward_.size() == spectrum_.size(), "ProblemInstance: T and spectrum sizes differ");
        require(exponents_.beta >= 0.0 && exponents_.ell >= 0.0, "ProblemInstance: beta and ell must be >= 0");
        require(std::abs(exponents_.delta - (2.0 * exponents_.ell - exponents_.beta + 1.0)) <= 1e-12,
                "ProblemInstance: Delta must equal 2 ell - beta + 1");
        require(exponents_.delta >= 1.0, "ProblemInstance: Delta must be >= 1");
        require(exponents_.gamma >= 1.0, "ProblemInstance: gamma must be >= 1");
    }

    const Spectrum& spectrum() const { return spectrum_; }
    const LinearOp& forward() const { return forward_; }
    const Exponents& exponents() const { return exponents_; }
    const std::string& label() const { return label_; }
    int size() const { return spectrum_.size(); }
    double alpha0() const { return spectrum_.alpha0(); }

    ProblemInstance with_gamma(double gamma) const {
        Exponents e = exponents_;
        e.gamma = gamma;
        return {spectrum_, forward_, e, label_};
    }

private:
    Spectrum spectrum_;
    LinearOp forward_;
    Exponents exponents_;
    std::string label_;
};

/// Sequence-model instance: c_i = 1 and T diagonal with t_i = lambda_i^(Delta-1),
/// so M(alpha) = C^(alpha+Delta-1) exactly.
inline ProblemInstance diagonal_instance(int n, double p, int d, double beta = 0.0, double ell = 0.0,
                                         double gamma = 1.0) {
    Spectrum spectrum = Spectrum::polynomial(p, d, n);
    const Exponents e = Exponents::from(beta, ell, gamma);
    LinearOp forward = LinearOp::diagonal(spectrum.lambda_pow(e.delta - 1.0), true);
    return {std::move(spectrum), std::move(forward), e, "diagonal"};
}

/// C^alpha: diagonal with entries lambda_i^(2 alpha).
inline LinearOp covariance_power(const Spectrum& spec, double alpha) {
    return LinearOp::diagonal(spec.lambda_pow(2.0 * alpha), true);
}

namespace detail {

inline void require_trace_class(const ProblemInstance& instance, double alpha, const char* what) {
    require(alpha > instance.alpha0(), std::string(what) + ": alpha must exceed alpha_0 = d/(2p)");
}

} // namespace detail

/// M(alpha) = T C^alpha T^T. Diagonal when T is diagonal; otherwise dense,
/// symmetrized, and checked for eigenvalues below -1e-10 * lambda_max.
inline LinearOp make_M(const ProblemInstance& instance, double alpha) {
    detail::require_trace_class(instance, alpha, "make_M");
    const Eigen::VectorXd prior = instance.spectrum().lambda_pow(2.0 * alpha);
    const LinearOp& t = instance.forward();
    if (t.is_diagonal()) {
        const Eigen::VectorXd& td = t.diagonal_values();
        return LinearOp::diagonal(td.cwiseProduct(td).cwiseProduct(prior), true);
    }
    const Eigen::MatrixXd& tm = t.matrix();
    Eigen::MatrixXd m = tm * prior.asDiagonal() * tm.transpose();
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    const double bottom = eig.eigenvalues().minCoeff();
    if (bottom < -1e-10 * top) {
        throw NumericalError("make_M: assembled M(alpha) has eigenvalue " + std::to_string(bottom) +
                             " below -1e-10 * lambda_max");
    }
    return LinearOp::dense(std::move(m), true);
}

namespace detail {

/// G = C^{-(alpha+Delta-1)/2} T C^{alpha/2}, so that
/// C^{-a/2} M(alpha) C^{-a/2} = G G^T without forming M.
inline Eigen::MatrixXd scaled_forward(const ProblemInstance& instance, double alpha) {
    const double a = alpha + instance.exponents().delta - 1.0;
    const Eigen::VectorXd left = instance.spectrum().lambda_pow(-a);
    const Eigen::VectorXd right = instance.spectrum().lambda_pow(alpha);
    return left.asDiagonal() * instance.forward().to_dense() * right.asDiagonal();
}

} // namespace detail

/// Frobenius norm of J = C^{-(a)/2} M(alpha) C^{-(a)/2} - I, a = alpha + Delta - 1.
inline double hs_defect(const ProblemInstance& instance, double alpha) {
    detail::require_trace_class(instance, alpha, "hs_defect");
    const double a = alpha + instance.exponents().delta - 1.0;
    if (instance.forward().is_diagonal()) {
        const Eigen::VectorXd g = instance.spectrum().lambda_pow(-a).cwiseProduct(instance.forward().diagonal_values())
                                      .cwiseProduct(instance.spectrum().lambda_pow(alpha));
        return (g.cwiseProduct(g).array() - 1.0).matrix().norm();
    }
    const Eigen::MatrixXd g = detail::scaled_forward(instance, alpha);
    Eigen::MatrixXd j = g * g.transpose();
    j.diagonal().array() -= 1.0;
    return j.norm();
}

// ---------------------------------------------------------------------------
// Numerical checks of the operator assumptions.

struct RatioRange {
    double r = 0.0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
};

/// Finite-section operator norms for one alpha. Statement (5) is evaluated
/// at s = 0; statement (6) is the max over x in {-1/2, 0, 1/2, 1}.
struct AssumptionNorms {
    double alpha = 0.0;
    double statement3 = 0.0; ///< ||C^{alpha/2} T^T C^{-(alpha+Delta-1)/2}||
    double statement4 = 0.0; ///< ||C^{-(alpha+Delta-1)} M(alpha)||
    double statement5 = 0.0; ///< ||C^{-(alpha+Delta-1)/2} M(alpha)^{1/2}||
    double statement6 = 0.0; ///< max_x ||M(alpha)^x C^{-x(alpha+Delta-1)}||
    double statement7 = 0.0; ///< ||M(alpha) C^{-(alpha+Delta-1)}||
    bool converged = true;
};

struct AssumptionLevel {
    int size = 0;
    std::vector<RatioRange> ratios;
    std::vector<AssumptionNorms> norms;
};

struct AssumptionReport {
    AssumptionLevel coarse;
    AssumptionLevel fine;
    double band = 50.0;
    bool consistent = false;
};

/// Band c* for the consistency verdict.
inline constexpr double kAssumptionBand = 50.0;

inline AssumptionLevel evaluate_assumptions(const ProblemInstance& instance, const std::vector<double>& alpha_grid,
                                            const std::vector<double>& r_grid, int probes, std::uint64_t seed) {
    require(probes >= 1, "verify_assumptions: need at least one probe");
    const int n = instance.size();
    const Spectrum& spec = instance.spectrum();
    const LinearOp& t = instance.forward();
    const double delta = instance.exponents().delta;

    AssumptionLevel level;
    level.size = n;

    RandomStream rng(stream_key(seed, "assumption-probes", 0.0, static_cast<std::uint64_t>(n)));
    std::vector<Eigen::VectorXd> vs;
    for (int k = 0; k < probes; ++k) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) {
            v(i) = rng.normal();
        }
        vs.push_back(std::move(v));
    }
    const Eigen::VectorXd smooth = spec.lambda_pow(delta - 1.0);
    for (double r : r_grid) {
        require(r >= 0.0, "verify_assumptions: r must be >= 0");
        const Eigen::VectorXd weight = spec.lambda_pow(-r);
        RatioRange range{r, std::numeric_limits<double>::infinity(), 0.0};
        for (const auto& v : vs) {
            const double num = weight.cwiseProduct(t.apply(v)).norm();
            const double den = weight.cwiseProduct(smooth).cwiseProduct(v).norm();
            const double ratio = num / den;
            range.min_ratio = std::min(range.min_ratio, ratio);
            range.max_ratio = std::max(range.max_ratio, ratio);
        }
        level.ratios.push_back(range);
    }

    for (double alpha : alpha_grid) {
        detail::require_trace_class(instance, alpha, "verify_assumptions");
        const double a = alpha + delta - 1.0;
        AssumptionNorms out;
        out.alpha = alpha;
        const Eigen::VectorXd la = spec.lambda_pow(alpha);
        const Eigen::VectorXd inv_a = spec.lambda_pow(-a);
        const Eigen::VectorXd prior = spec.lambda_pow(2.0 * alpha);
        const Eigen::VectorXd inv_2a = spec.lambda_pow(-2.0 * a);

        if (t.is_diagonal()) {
            const Eigen::VectorXd& td = t.diagonal_values();
            const Eigen::VectorXd g = spec.lambda_pow(-a).cwiseProduct(td).cwiseProduct(la);
            out.statement3 = la.cwiseProduct(td).cwiseProduct(inv_a).cwiseAbs().maxCoeff();
            out.statement4 = inv_2a.cwiseProduct(td).cwiseProduct(td).cwiseProduct(prior).cwiseAbs().maxCoeff();
            out.statement7 = out.statement4;
            out.statement5 = g.cwiseAbs().maxCoeff();
            const double inv_min = 1.0 / g.cwiseAbs().minCoeff();
            out.statement6 = std::max({1.0, out.statement5, inv_min, out.statement7});
        } else {
            const Eigen::MatrixXd& tm = t.matrix();
            auto s3 = operator_norm(
                n, [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(la.cwiseProduct(tm.transpose() * inv_a.cwiseProduct(v))); },
                [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(inv_a.cwiseProduct(tm * la.cwiseProduct(v))); });
            auto s4 = operator_norm(
                n,
                [&](const Eigen::VectorXd& v) {
                    return Eigen::VectorXd(inv_2a.cwiseProduct(tm * prior.cwiseProduct(tm.transpose() * v)));
                },
                [&](const Eigen::VectorXd& v) {
                    return Eigen::VectorXd(tm * prior.cwiseProduct(tm.transpose() * inv_2a.cwiseProduct(v)));
                });
            const Eigen::MatrixXd g = detail::scaled_forward(instance, alpha);
            auto s5 = operator_norm(
                n, [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(g * v); },
                [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(g.transpose() * v); });
            // ||M^{-1/2} C^{a/2}||^2 = ||(G G^T)^{-1}||; G G^T is well conditioned.
            const Eigen::MatrixXd s = g * g.transpose();
            Eigen::LLT<Eigen::MatrixXd> llt(s);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("verify_assumptions: C^{-a/2} M C^{-a/2} is not positive definite");
            }
            auto sinv = symmetric_operator_norm(n, [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(llt.solve(v)); });
            out.statement3 = s3.value;
            out.statement4 = s4.value;
            out.statement7 = s4.value; // (M C^{-a})^T = C^{-a} M
            out.statement5 = s5.value;
            out.statement6 = std::max({1.0, s5.value, std::sqrt(sinv.value), s4.value});
            out.converged = s3.converged && s4.converged && s5.converged && sinv.converged;
        }
        level.norms.push_back(out);
    }
    return level;
}

inline bool within_band(double x, double band) { return std::isfinite(x) && x >= 1.0 / band && x <= band; }

/// Runs the checks on the instance at N and 2N and issues a verdict:
/// consistent iff every ratio and norm lies in [1/c*, c*] at both levels and
/// every fine/coarse quotient of a norm does too.
inline AssumptionReport verify_assumptions(const ProblemInstance& coarse, const ProblemInstance& fine,
                                           const std::vector<double>& alpha_grid, const std::vector<double>& r_grid,
                                           int probes, std::uint64_t seed, double band = kAssumptionBand) {
    AssumptionReport report;
    report.band = band;
    report.coarse = evaluate_assumptions(coarse, alpha_grid, r_grid, probes, seed);
    report.fine = evaluate_assumptions(fine, alpha_grid, r_grid, probes, seed);
    bool ok = true;
    for (const auto* level : {&report.coarse, &report.fine}) {
        for (const auto& r : level->ratios) {
            ok = ok && within_band(r.min_ratio, band) && within_band(r.max_ratio, band);
        }
        for (const auto& nrm : level->norms) {
            ok = ok && nrm.converged;
            for (double v : {nrm.statement3, nrm.statement4, nrm.statement5, nrm.statement6, nrm.statement7}) {
                ok = ok && within_band(v, band);
            }
        }
    }
    for (std::size_t k = 0; k < report.coarse.norms.size(); ++k) {
        const auto& c = report.coarse.norms[k];
        const auto& f = report.fine.norms[k];
        ok = ok && within_band(f.statement3 / c.statement3, band) && within_band(f.statement4 / c.statement4, band) &&
             within_band(f.statement5 / c.statement5, band) && within_band(f.statement6 / c.statement6, band);
    }
    report.consistent = ok;
    return report;
}

} // namespace ebip
