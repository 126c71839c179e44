#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ebip/error.hpp"

namespace ebip {

/// Eigenvalues lambda_i^2 = c_i^2 * i^(-2p/d) of the prior covariance C,
/// truncated at N = c.size(). The constants c_i are kept explicitly so the
/// artificial diagonal problem (which drops them) can be compared with the
/// full one.
class Spectrum {
public:
    Spectrum(double p, int d, std::vector<double> c, double bound)
        : p_(p), d_(d), c_(std::move(c)), bound_(bound) {
        require(p_ > 0.0, "Spectrum: p must be positive");
        require(d_ >= 1, "Spectrum: d must be >= 1");
        require(!c_.empty(), "Spectrum: need at least one eigenvalue");
        require(bound_ >= 1.0, "Spectrum: bound C must be >= 1");
        for (double ci : c_) {
            require(std::isfinite(ci) && ci > 0.0, "Spectrum: c_i must be positive");
            require(ci >= 1.0 / bound_ * (1.0 - 1e-12) && ci <= bound_ * (1.0 + 1e-12),
                    "Spectrum: c_i outside [1/C, C]");
        }
    }

    /// c_i == 1, i.e. lambda_i^2 = i^(-2p/d) exactly.
    static Spectrum polynomial(double p, int d, int n) {
        require(n >= 1, "Spectrum: N must be >= 1");
        return Spectrum(p, d, std::vector<double>(static_cast<std::size_t>(n), 1.0), 1.0);
    }

    /// Builds the spectrum from eigenvalues, recovering c_i = lambda_i i^(p/d)
    /// and the tightest bound C.
    static Spectrum from_eigenvalues(double p, int d, const std::vector<double>& lambda_sq) {
        require(!lambda_sq.empty(), "Spectrum: need at least one eigenvalue");
        std::vector<double> c(lambda_sq.size());
        double bound = 1.0;
        for (std::size_t k = 0; k < lambda_sq.size(); ++k) {
            require(lambda_sq[k] > 0.0, "Spectrum: eigenvalues must be positive");
            const double i = static_cast<double>(k + 1);
            c[k] = std::sqrt(lambda_sq[k]) * std::pow(i, p / d);
            bound = std::max({bound, c[k], 1.0 / c[k]});
        }
        return Spectrum(p, d, std::move(c), bound);
    }

    int size() const { return static_cast<int>(c_.size()); }
    double p() const { return p_; }
    int d() const { return d_; }
    double bound() const { return bound_; }
    const std::vector<double>& c() const { return c_; }

    /// Trace-class threshold alpha_0 = d / (2p).
    double alpha0() const { return d_ / (2.0 * p_); }

    /// lambda_i^2 for 1-based i.
    double lambda_sq(int i) const {
        const double ci = c_[static_cast<std::size_t>(i - 1)];
        return ci * ci * std::pow(static_cast<double>(i), -2.0 * p_ / d_);
    }

    /// Vector of lambda_i^t (note: lambda, not lambda^2), i = 1..N.
    Eigen::VectorXd lambda_pow(double t) const {
        Eigen::VectorXd out(size());
        for (int i = 1; i <= size(); ++i) {
            out(i - 1) = std::pow(lambda_sq(i), 0.5 * t);
        }
        return out;
    }

    /// Restriction to the first n eigenvalues.
    Spectrum truncated(int n) const {
        require(n >= 1 && n <= size(), "Spectrum: truncation out of range");
        return Spectrum(p_, d_, std::vector<double>(c_.begin(), c_.begin() + n), bound_);
    }

private:
    double p_;
    int d_;
    std::vector<double> c_;
    double bound_;
};

} // namespace ebip
