#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "depmmd/common.hpp"

namespace depmmd {

// splitmix64 used as a counter-based generator: output i is a fixed mix of
// seed + (i+1) * golden gamma. The full algorithm is documented in the README
// so synthetic fixtures can be regenerated outside this codebase.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on (0, 1]: 53-bit mantissa, never zero (safe under log()).
    double uniform() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) via rejection sampling.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t threshold = -bound % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// First `count` entries of a seeded partial Fisher-Yates shuffle of [0, n).
// Exposed so tests can reproduce the exact subset a cap-limited median uses.
inline std::vector<Index> subsample_indices(Index n, Index count, std::uint64_t seed) {
    if (count > n) count = n;
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    SplitMix64 rng(seed);
    for (Index i = 0; i < count; ++i) {
        const Index j = i + static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
}

}  // namespace depmmd
