#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ebip {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

/// Derives a stream key from (master seed, purpose, n, replicate). Streams
/// keyed this way do not depend on the order in which replicates run.
constexpr std::uint64_t stream_key(std::uint64_t master_seed, std::string_view purpose,
                                   double n = 0.0, std::uint64_t replicate = 0) {
    std::uint64_t k = detail::splitmix64(master_seed);
    k = detail::splitmix64(k ^ detail::fnv1a(purpose));
    k = detail::splitmix64(k ^ std::bit_cast<std::uint64_t>(n));
    k = detail::splitmix64(k ^ replicate);
    return k;
}

/// Counter-based generator: output j is splitmix64(key + j * golden gamma).
/// Gaussian variates use Box-Muller on 53-bit uniforms, so draws are
/// identical across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() {
        return detail::splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    int sign() { return (next_u64() >> 63) != 0 ? 1 : -1; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ebip
