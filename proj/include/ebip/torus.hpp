#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "ebip/error.hpp"
#include "ebip/linear_op.hpp"
#include "ebip/operators.hpp"
#include "ebip/spectrum.hpp"

namespace ebip {

/// One Fourier coefficient q_hat(k) of a real function on the torus,
/// q(x) = sum_k q_hat(k) exp(2 pi i k.x / period).
struct FourierCoeff {
    std::vector<int> k;
    std::complex<double> value;
};

/// Real zero-mean basis function sqrt(2) cos(2 pi k.x/L) or sqrt(2) sin(2 pi k.x/L).
/// k is the representative of {k, -k} whose first nonzero entry is positive.
struct TorusMode {
    std::vector<int> k;
    bool sine = false;
    double rho_sq = 0.0; ///< eigenvalue of -Laplacian, (2 pi / L)^2 |k|^2
};

inline int squared_length(const std::vector<int>& k) {
    int s = 0;
    for (int v : k) {
        s += v * v;
    }
    return s;
}

/// Modes with 0 < |k|^2 <= K^2, sorted by rho^2 then lexicographically by k,
/// cos before sin.
inline std::vector<TorusMode> torus_basis(int d, int K, double period = 1.0) {
    require(d >= 1 && d <= 3, "torus_basis: d must be 1, 2 or 3");
    require(K >= 1, "torus_basis: K must be >= 1");
    require(period > 0.0, "torus_basis: period must be positive");
    std::vector<std::vector<int>> reps;
    std::vector<int> k(static_cast<std::size_t>(d), -K);
    while (true) {
        const int len = squared_length(k);
        if (len > 0 && len <= K * K) {
            const auto first = std::find_if(k.begin(), k.end(), [](int v) { return v != 0; });
            if (*first > 0) {
                reps.push_back(k);
            }
        }
        int pos = d - 1;
        while (pos >= 0 && k[static_cast<std::size_t>(pos)] == K) {
            k[static_cast<std::size_t>(pos)] = -K;
            --pos;
        }
        if (pos < 0) {
            break;
        }
        ++k[static_cast<std::size_t>(pos)];
    }
    std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
        const int la = squared_length(a);
        const int lb = squared_length(b);
        return la != lb ? la < lb : a < b;
    });
    const double scale = std::pow(2.0 * std::numbers::pi / period, 2);
    std::vector<TorusMode> modes;
    modes.reserve(2 * reps.size());
    for (const auto& r : reps) {
        const double rho_sq = scale * squared_length(r);
        modes.push_back({r, false, rho_sq});
        modes.push_back({r, true, rho_sq});
    }
    return modes;
}

namespace detail {

using FreqMap = std::map<std::vector<int>, std::complex<double>>;

inline FreqMap to_freq_map(const std::vector<FourierCoeff>& coeffs, int d) {
    FreqMap map;
    for (const auto& c : coeffs) {
        require(static_cast<int>(c.k.size()) == d, "Fourier coefficient has wrong dimension");
        require(std::isfinite(c.value.real()) && std::isfinite(c.value.imag()), "Fourier coefficient is not finite");
        map[c.k] += c.value;
    }
    return map;
}

inline std::vector<int> negate(std::vector<int> k) {
    for (int& v : k) {
        v = -v;
    }
    return k;
}

inline std::vector<int> difference(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        out[j] = a[j] - b[j];
    }
    return out;
}

} // namespace detail

/// Rejects coefficient lists that encode a complex-valued function.
inline void require_hermitian(const std::vector<FourierCoeff>& coeffs, int d) {
    const auto map = detail::to_freq_map(coeffs, d);
    for (const auto& [k, v] : map) {
        const auto it = map.find(detail::negate(k));
        const std::complex<double> partner = it == map.end() ? 0.0 : it->second;
        const double tol = 1e-12 * std::max(1.0, std::abs(v));
        require(std::abs(partner - std::conj(v)) <= tol,
                "Fourier coefficients are not Hermitian (q would be complex-valued)");
    }
}

inline double evaluate_fourier(const std::vector<FourierCoeff>& coeffs, const std::vector<double>& x,
                               double period = 1.0) {
    std::complex<double> sum = 0.0;
    for (const auto& c : coeffs) {
        double phase = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            phase += c.k[j] * x[j];
        }
        sum += c.value * std::polar(1.0, 2.0 * std::numbers::pi * phase / period);
    }
    return sum.real();
}

/// Samples q on a uniform grid fine enough to resolve its highest frequency
/// and rejects negative values.
inline void require_nonnegative(const std::vector<FourierCoeff>& coeffs, int d) {
    int kmax = 0;
    for (const auto& c : coeffs) {
        for (int v : c.k) {
            kmax = std::max(kmax, std::abs(v));
        }
    }
    const int m = std::max(16, 8 * kmax + 1);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    while (true) {
        for (int j = 0; j < d; ++j) {
            x[static_cast<std::size_t>(j)] = static_cast<double>(idx[static_cast<std::size_t>(j)]) / m;
        }
        const double value = evaluate_fourier(coeffs, x);
        require(value >= -1e-12, "multiplier function has a negative sample value");
        int pos = d - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - 1) {
            idx[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) {
            break;
        }
        ++idx[static_cast<std::size_t>(pos)];
    }
}

/// Galerkin matrix of multiplication by q in the real basis:
/// entry (a, b) = sum_{k,l} conj(a_k) b_l q_hat(k - l).
inline Eigen::MatrixXd multiplication_matrix(const std::vector<TorusMode>& modes,
                                             const std::vector<FourierCoeff>& coeffs, int d) {
    const auto map = detail::to_freq_map(coeffs, d);
    const int n = static_cast<int>(modes.size());
    const double s = 1.0 / std::numbers::sqrt2;
    using Expansion = std::vector<std::pair<std::vector<int>, std::complex<double>>>;
    std::vector<Expansion> expand(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        const auto& m = modes[static_cast<std::size_t>(a)];
        if (m.sine) {
            expand[static_cast<std::size_t>(a)] = {{m.k, {0.0, -s}}, {detail::negate(m.k), {0.0, s}}};
        } else {
            expand[static_cast<std::size_t>(a)] = {{m.k, {s, 0.0}}, {detail::negate(m.k), {s, 0.0}}};
        }
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    if (map.empty()) {
        return out;
    }
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
            std::complex<double> v = 0.0;
            for (const auto& [k, x] : expand[static_cast<std::size_t>(a)]) {
                for (const auto& [l, y] : expand[static_cast<std::size_t>(b)]) {
                    const auto it = map.find(detail::difference(k, l));
                    if (it != map.end()) {
                        v += std::conj(x) * y * it->second;
                    }
                }
            }
            out(a, b) = v.real();
            out(b, a) = v.real();
        }
    }
    return out;
}

/// Input for the two torus examples. period defaults to 1, the unit torus.
struct TorusSpec {
    int example = 1;
    int d = 1;
    int K = 8;
    double period = 1.0;
    std::vector<FourierCoeff> q;
    std::vector<FourierCoeff> r;
};

namespace detail {

inline bool is_diagonal_matrix(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd off = m;
    off.diagonal().setZero();
    return off.cwiseAbs().maxCoeff() == 0.0;
}

inline Eigen::MatrixXd shifted_laplacian(const std::vector<TorusMode>& modes, const std::vector<FourierCoeff>& coeffs,
                                         int d) {
    require_hermitian(coeffs, d);
    require_nonnegative(coeffs, d);
    Eigen::MatrixXd a = multiplication_matrix(modes, coeffs, d);
    for (std::size_t j = 0; j < modes.size(); ++j) {
        a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += modes[j].rho_sq;
    }
    return a;
}

inline Spectrum torus_spectrum(const std::vector<TorusMode>& modes, int d) {
    std::vector<double> lambda_sq(modes.size());
    for (std::size_t j = 0; j < modes.size(); ++j) {
        lambda_sq[j] = 1.0 / (modes[j].rho_sq * modes[j].rho_sq);
    }
    return Spectrum::from_eigenvalues(2.0, d, lambda_sq);
}

inline Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& a, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(what) + ": A_0 + M_q is not positive definite");
    }
    return llt;
}

inline std::vector<TorusMode> checked_basis(const TorusSpec& spec) {
    auto modes = torus_basis(spec.d, spec.K, spec.period);
    require(modes.size() >= 16, "torus instance: K too small, need N >= 16 modes");
    return modes;
}

} // namespace detail

/// A = A_0 + M_q, C_1 = I, C = A_0^{-2}: T = (A_0 + M_q)^{-1}, exponents (0, 1/2, 2).
inline ProblemInstance build_example1(const TorusSpec& spec, double gamma = 1.0) {
    const auto modes = detail::checked_basis(spec);
    const Eigen::MatrixXd a = detail::shifted_laplacian(modes, spec.q, spec.d);
    const int n = static_cast<int>(modes.size());
    LinearOp t = detail::is_diagonal_matrix(a)
                     ? LinearOp::diagonal(a.diagonal().cwiseInverse(), true)
                     : [&] {
                           Eigen::MatrixXd inv = detail::spd_factor(a, "build_example1").solve(Eigen::MatrixXd::Identity(n, n));
                           inv = 0.5 * (inv + inv.transpose()).eval();
                           return LinearOp::dense(std::move(inv), true);
                       }();
    return {detail::torus_spectrum(modes, spec.d), std::move(t), Exponents::from(0.0, 0.5, gamma), "example1"};
}

/// C_1 = (A_0 + M_r)^{-2}, C = A_0^{-2}: T = (A_0 + M_r)(A_0 + M_q)^{-1}, exponents (1, 1/2, 1).
inline ProblemInstance build_example2(const TorusSpec& spec, double gamma = 1.0) {
    const auto modes = detail::checked_basis(spec);
    const Eigen::MatrixXd aq = detail::shifted_laplacian(modes, spec.q, spec.d);
    const Eigen::MatrixXd ar = detail::shifted_laplacian(modes, spec.r, spec.d);
    LinearOp t = LinearOp::identity(static_cast<int>(modes.size()));
    if (detail::is_diagonal_matrix(aq) && detail::is_diagonal_matrix(ar)) {
        t = LinearOp::diagonal(ar.diagonal().cwiseQuotient(aq.diagonal()), true);
    } else {
        // (A_q^{-1} A_r)^T = A_r A_q^{-1} since both factors are symmetric.
        const Eigen::MatrixXd x = detail::spd_factor(aq, "build_example2").solve(ar);
        t = LinearOp::dense(x.transpose());
    }
    return {detail::torus_spectrum(modes, spec.d), std::move(t), Exponents::from(1.0, 0.5, gamma), "example2"};
}

inline ProblemInstance build_torus_instance(const TorusSpec& spec, double gamma = 1.0) {
    require(spec.example == 1 || spec.example == 2, "torus instance: example must be 1 or 2");
    return spec.example == 1 ? build_example1(spec, gamma) : build_example2(spec, gamma);
}

} // namespace ebip
