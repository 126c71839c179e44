#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <variant>

#include "ebip/error.hpp"
#include "ebip/random.hpp"

namespace ebip {

/// Truncated operator on the first N eigen-coordinates: either a diagonal
/// (stored as its entries) or a dense N x N matrix. Diagonal storage is kept
/// whenever the operator is exactly diagonal so large-N sequence problems
/// never allocate N x N storage.
class LinearOp {
public:
    static LinearOp diagonal(Eigen::VectorXd values, bool spd = false) {
        require(values.size() >= 1, "LinearOp: empty diagonal");
        require(values.allFinite(), "LinearOp: non-finite diagonal entry");
        if (spd) {
            require((values.array() > 0.0).all(), "LinearOp: SPD diagonal needs positive entries");
        }
        return LinearOp(Repr{std::move(values)}, spd);
    }

    /// Dense operator. With spd set, symmetry is checked here (relative 1e-12);
    /// definiteness is the producer's responsibility.
    static LinearOp dense(Eigen::MatrixXd matrix, bool spd = false) {
        require(matrix.rows() >= 1 && matrix.rows() == matrix.cols(), "LinearOp: matrix must be square");
        require(matrix.allFinite(), "LinearOp: non-finite matrix entry");
        if (spd) {
            const double scale = matrix.cwiseAbs().maxCoeff();
            const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
            require(asym <= 1e-12 * scale, "LinearOp: SPD matrix is not symmetric");
        }
        return LinearOp(Repr{std::move(matrix)}, spd);
    }

    static LinearOp identity(int n) { return diagonal(Eigen::VectorXd::Ones(n), true); }

    int size() const {
        return is_diagonal() ? static_cast<int>(std::get<0>(repr_).size())
                             : static_cast<int>(std::get<1>(repr_).rows());
    }
    bool is_diagonal() const { return repr_.index() == 0; }
    bool spd() const { return spd_; }

    const Eigen::VectorXd& diagonal_values() const {
        require(is_diagonal(), "LinearOp: operator is dense");
        return std::get<0>(repr_);
    }
    const Eigen::MatrixXd& matrix() const {
        require(!is_diagonal(), "LinearOp: operator is diagonal");
        return std::get<1>(repr_);
    }

    Eigen::MatrixXd to_dense() const {
        if (is_diagonal()) {
            return std::get<0>(repr_).asDiagonal();
        }
        return std::get<1>(repr_);
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        if (is_diagonal()) {
            return std::get<0>(repr_).cwiseProduct(v);
        }
        return std::get<1>(repr_) * v;
    }

    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const {
        if (is_diagonal()) {
            return std::get<0>(repr_).cwiseProduct(v);
        }
        return std::get<1>(repr_).transpose() * v;
    }

    double trace() const {
        return is_diagonal() ? std::get<0>(repr_).sum() : std::get<1>(repr_).trace();
    }

private:
    using Repr = std::variant<Eigen::VectorXd, Eigen::MatrixXd>;
    LinearOp(Repr repr, bool spd) : repr_(std::move(repr)), spd_(spd) {}

    Repr repr_;
    bool spd_;
};

struct PowerIterationResult {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline constexpr double kPowerIterationTol = 1e-8;
inline constexpr int kPowerIterationMaxIter = 10000;

/// Spectral norm ||A|| by power iteration on A^T A, using only matvecs.
/// Converged when successive estimates of ||A||^2 agree to `tol` relative.
template <class Apply, class ApplyTranspose>
PowerIterationResult operator_norm(int n, Apply&& apply, ApplyTranspose&& apply_transpose,
                                   double tol = kPowerIterationTol, int max_iter = kPowerIterationMaxIter,
                                   std::uint64_t seed = 0x5eed) {
    RandomStream rng(stream_key(seed, "power-iteration", 0.0, static_cast<std::uint64_t>(n)));
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) {
        x(i) = rng.normal();
    }
    x.normalize();
    double estimate = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd ax = apply(x);
        const double next = ax.squaredNorm();
        Eigen::VectorXd y = apply_transpose(ax);
        const double ynorm = y.norm();
        if (ynorm == 0.0) {
            return {0.0, it, true};
        }
        x = y / ynorm;
        if (it > 1 && std::abs(next - estimate) <= tol * next) {
            return {std::sqrt(next), it, true};
        }
        estimate = next;
    }
    return {std::sqrt(estimate), max_iter, false};
}

template <class Apply>
PowerIterationResult symmetric_operator_norm(int n, Apply&& apply, double tol = kPowerIterationTol,
                                             int max_iter = kPowerIterationMaxIter) {
    return operator_norm(n, apply, apply, tol, max_iter);
}

} // namespace ebip
