#pragma once

#include <cmath>
#include <variant>

#include "ebip/operators.hpp"
#include "ebip/torus.hpp"

namespace ebip {

/// Sequence-model instance: c_i = 1, T = C^{(Delta-1)/2}.
struct DiagonalSpec {
    int N = 8192;
    double p = 2.0;
    int d = 2;
    double beta = 0.0;
    double ell = 0.0;
};

using InstanceDescriptor = std::variant<DiagonalSpec, TorusSpec>;

inline ProblemInstance build_instance(const InstanceDescriptor& desc, double gamma = 1.0) {
    if (const auto* diag = std::get_if<DiagonalSpec>(&desc)) {
        return diagonal_instance(diag->N, diag->p, diag->d, diag->beta, diag->ell, gamma);
    }
    return build_torus_instance(std::get<TorusSpec>(desc), gamma);
}

/// The instance at roughly twice the truncation: N doubled, or K scaled by
/// 2^{1/d} on the torus.
inline InstanceDescriptor refined(const InstanceDescriptor& desc) {
    if (const auto* diag = std::get_if<DiagonalSpec>(&desc)) {
        DiagonalSpec out = *diag;
        out.N *= 2;
        return out;
    }
    TorusSpec out = std::get<TorusSpec>(desc);
    out.K = static_cast<int>(std::ceil(out.K * std::pow(2.0, 1.0 / out.d)));
    return out;
}

} // namespace ebip
