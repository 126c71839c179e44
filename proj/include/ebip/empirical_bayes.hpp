#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ebip/error.hpp"
#include "ebip/operators.hpp"
#include "ebip/sequence.hpp"

namespace ebip {

struct EBConfig {
    double offset_c1 = 1.0;
    double threshold_lo = 1.0;
    double threshold_hi = 2.0;
    int grid_points = 256;
    double refine_tol = 1e-4;
    /// Upper scan limit for alpha_bounds is 2 * beta_tilde_max.
    double beta_tilde_max = 2.0;

    void validate() const {
        require(offset_c1 >= 0.0, "EBConfig: offset_c1 must be >= 0");
        require(threshold_lo > 0.0 && threshold_lo < threshold_hi, "EBConfig: need 0 < threshold_lo < threshold_hi");
        require(grid_points >= 64, "EBConfig: grid_points must be >= 64");
        require(refine_tol > 0.0, "EBConfig: refine_tol must be > 0");
        require(beta_tilde_max > 0.0, "EBConfig: beta_tilde_max must be > 0");
    }
};

struct LikelihoodCurve {
    std::vector<double> alpha_tilde;
    std::vector<double> log_likelihood;
};

struct EBEstimate {
    double alpha_tilde_raw = 0.0;
    double alpha_tilde_hat = 0.0;
    double alpha_hat = 0.0;
    double n = 0.0;
    LikelihoodCurve curve;
};

struct BoundIndices {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    std::optional<std::pair<double, double>> interval;
};

namespace detail {

/// Compensated (Neumaier) sum in a fixed order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double loglog_ratio(double n) { return std::log(std::log(n)) / std::log(n); }

} // namespace detail

/// l_n(a) = -1/2 sum_i [ log(1 + n / i^{1+2a}) - n^2 / (i^{1+2a} + n) d_i^2 ].
inline double log_likelihood(const SpectralVector& d, double n, double alpha_tilde) {
    require(n > 0.0, "log_likelihood: n must be > 0");
    require(alpha_tilde >= 0.0, "log_likelihood: alpha_tilde must be >= 0");
    const double e = 1.0 + 2.0 * alpha_tilde;
    const double n2 = n * n;
    detail::CompensatedSum sum;
    const auto& v = d.values();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double w = std::pow(static_cast<double>(k + 1), e);
        sum.add(std::log1p(n / w) - n2 / (w + n) * v(k) * v(k));
    }
    return -0.5 * sum.value();
}

struct MaximizerResult {
    double alpha_tilde_raw = 0.0;
    LikelihoodCurve curve;
};

/// Grid scan over [0, log n] followed by golden-section search on the two
/// grid cells around the best point. The grid maximum is kept if the
/// refinement does not beat it.
inline MaximizerResult maximize_likelihood(const SpectralVector& d, double n, const EBConfig& cfg = {}) {
    cfg.validate();
    require(n >= 3.0, "maximize_likelihood: n must be >= 3");
    require(d.size() >= 16, "maximize_likelihood: N must be >= 16");
    const double top = std::log(n);
    const int g = cfg.grid_points;
    MaximizerResult out;
    out.curve.alpha_tilde.resize(static_cast<std::size_t>(g));
    out.curve.log_likelihood.resize(static_cast<std::size_t>(g));
    int best = 0;
    for (int k = 0; k < g; ++k) {
        const double a = k == g - 1 ? top : top * k / (g - 1);
        const double v = log_likelihood(d, n, a);
        out.curve.alpha_tilde[static_cast<std::size_t>(k)] = a;
        out.curve.log_likelihood[static_cast<std::size_t>(k)] = v;
        if (v > out.curve.log_likelihood[static_cast<std::size_t>(best)]) {
            best = k;
        }
    }
    double lo = out.curve.alpha_tilde[static_cast<std::size_t>(std::max(best - 1, 0))];
    double hi = out.curve.alpha_tilde[static_cast<std::size_t>(std::min(best + 1, g - 1))];
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - ratio * (hi - lo);
    double e = lo + ratio * (hi - lo);
    double fc = log_likelihood(d, n, c);
    double fe = log_likelihood(d, n, e);
    while (hi - lo > cfg.refine_tol) {
        if (fc >= fe) {
            hi = e;
            e = c;
            fe = fc;
            c = hi - ratio * (hi - lo);
            fc = log_likelihood(d, n, c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + ratio * (hi - lo);
            fe = log_likelihood(d, n, e);
        }
    }
    const double x = 0.5 * (lo + hi);
    const double best_value = out.curve.log_likelihood[static_cast<std::size_t>(best)];
    out.alpha_tilde_raw = log_likelihood(d, n, x) > best_value ? x : out.curve.alpha_tilde[static_cast<std::size_t>(best)];
    return out;
}

/// alpha_tilde_hat = max(0, raw - C1 loglog n / log n); alpha_hat = (d/p)(alpha_tilde_hat + 1/2) + 1 - Delta.
inline EBEstimate estimate_from_raw(double alpha_tilde_raw, double n, int d, double p, double delta,
                                    double offset_c1) {
    EBEstimate est;
    est.n = n;
    est.alpha_tilde_raw = alpha_tilde_raw;
    est.alpha_tilde_hat = std::max(0.0, alpha_tilde_raw - offset_c1 * detail::loglog_ratio(n));
    est.alpha_hat = (d / p) * (est.alpha_tilde_hat + 0.5) + 1.0 - delta;
    return est;
}

inline EBEstimate estimate_alpha(const SpectralVector& d, double n, const ProblemInstance& instance,
                                 const EBConfig& cfg = {}) {
    MaximizerResult m = maximize_likelihood(d, n, cfg);
    EBEstimate est = estimate_from_raw(m.alpha_tilde_raw, n, instance.spectrum().d(), instance.spectrum().p(),
                                       instance.exponents().delta, cfg.offset_c1);
    est.curve = std::move(m.curve);
    return est;
}

inline double h_n(const SpectralVector& truth_mtilde, double n, double alpha_tilde) {
    require(n >= 3.0, "h_n: n must be >= 3");
    require(alpha_tilde >= 0.0, "h_n: alpha_tilde must be >= 0");
    const double e = 1.0 + 2.0 * alpha_tilde;
    const double n2 = n * n;
    detail::CompensatedSum sum;
    const auto& v = truth_mtilde.values();
    for (Eigen::Index k = 1; k < v.size(); ++k) {
        const double i = static_cast<double>(k + 1);
        const double w = std::pow(i, e);
        const double denom = w + n;
        sum.add(n2 * w * std::log(i) * v(k) * v(k) / (denom * denom));
    }
    return e / (std::pow(n, 1.0 / e) * std::log(n)) * sum.value();
}

namespace detail {

/// First a in [0, top] with h_n(a) > level, located on a uniform grid and
/// refined by bisection; nullopt if the scan never crosses.
inline std::optional<double> first_crossing(const SpectralVector& truth, double n, double level, double top,
                                            int points, double tol) {
    double prev = 0.0;
    if (h_n(truth, n, 0.0) > level) {
        return 0.0;
    }
    for (int k = 1; k < points; ++k) {
        const double a = top * k / (points - 1);
        if (h_n(truth, n, a) > level) {
            double lo = prev;
            double hi = a;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                (h_n(truth, n, mid) > level ? hi : lo) = mid;
            }
            return hi;
        }
        prev = a;
    }
    return std::nullopt;
}

} // namespace detail

inline BoundIndices alpha_bounds(const SpectralVector& truth_mtilde, double n, const EBConfig& cfg = {}) {
    cfg.validate();
    require(n >= 3.0, "alpha_bounds: n must be >= 3");
    const double cap = std::sqrt(std::log(n));
    const int points = 4 * cfg.grid_points;
    BoundIndices out;
    out.lower = detail::first_crossing(truth_mtilde, n, cfg.threshold_lo, cap, points, cfg.refine_tol).value_or(cap);
    const double log_n = std::log(n);
    out.upper = detail::first_crossing(truth_mtilde, n, cfg.threshold_hi * log_n * log_n, 2.0 * cfg.beta_tilde_max,
                                       points, cfg.refine_tol)
                    .value_or(std::numeric_limits<double>::infinity());
    if (std::isfinite(out.upper)) {
        const double shift = cfg.offset_c1 * detail::loglog_ratio(n);
        out.interval = std::make_pair(out.lower - shift, out.upper - shift);
    }
    return out;
}

struct BoundsRow {
    double n = 0.0;
    double lower_gap = 0.0; ///< max over truths of (beta_tilde - lower) log n
    double upper_gap = 0.0; ///< max over truths of (upper - beta_tilde) log n / loglog n
};

struct BoundsLemmaReport {
    std::vector<BoundsRow> rows;
    std::string verdict; ///< "bounded", "unbounded", "insufficient n-range" or "empty"
    double fitted_c0 = 0.0;
    double fitted_c1 = 0.0;
};

/// Bounded means: the largest gap on the upper half of n_list is at most
/// twice the largest gap on the lower half plus one, for both sequences.
inline BoundsLemmaReport check_bounds_lemma(const std::vector<SpectralVector>& truths, const std::vector<double>& n_list,
                                            double beta_tilde, const EBConfig& cfg = {}) {
    BoundsLemmaReport report;
    if (truths.empty()) {
        report.verdict = "empty";
        return report;
    }
    if (n_list.size() < 2) {
        report.verdict = "insufficient n-range";
        return report;
    }
    for (double n : n_list) {
        BoundsRow row{n, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto& t : truths) {
            const BoundIndices b = alpha_bounds(t, n, cfg);
            row.lower_gap = std::max(row.lower_gap, (beta_tilde - b.lower) * std::log(n));
            row.upper_gap = std::max(row.upper_gap, (b.upper - beta_tilde) / detail::loglog_ratio(n));
        }
        report.rows.push_back(row);
    }
    const std::size_t half = report.rows.size() / 2;
    auto bounded = [&](auto field) {
        double first = 0.0;
        double second = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < report.rows.size(); ++k) {
            const double v = field(report.rows[k]);
            if (k < half) {
                first = std::max(first, v);
            } else {
                second = std::max(second, v);
            }
        }
        return std::isfinite(second) && second <= 2.0 * first + 1.0;
    };
    const bool ok = bounded([](const BoundsRow& r) { return r.lower_gap; }) &&
                    bounded([](const BoundsRow& r) { return r.upper_gap; });
    // constants are fitted on the larger half of n_list ("n large enough")
    for (std::size_t k = half; k < report.rows.size(); ++k) {
        report.fitted_c0 = std::max(report.fitted_c0, report.rows[k].lower_gap);
        report.fitted_c1 = std::max(report.fitted_c1, report.rows[k].upper_gap);
    }
    report.verdict = ok ? "bounded" : "unbounded";
    return report;
}

} // namespace ebip
