#pragma once

#include <stdexcept>
#include <string>

namespace ebip {

/// Raised when a factorization, solve residual or iteration fails to meet
/// its numerical contract. Input validation uses std::invalid_argument.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

} // namespace ebip
