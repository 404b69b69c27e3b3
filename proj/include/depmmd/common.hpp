#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace depmmd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr const char* kVersion = "0.1.0";

// Base for all recoverable failures raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (manifest, delimited vectors, attributes).
struct FormatError : Error {
    using Error::Error;
};

// Invalid user-supplied specification (mixture spec, config values, bandwidths).
struct SpecError : Error {
    using Error::Error;
};

// A computation would exceed a configured resource limit.
struct ResourceError : Error {
    using Error::Error;
};

// Numerical integrity violations (corrupt MMD estimates, greedy stalls).
struct NumericError : Error {
    using Error::Error;
};

// API misuse: out-of-range indices, unknown labels, invalid weight rows.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Sum with pairwise (recursive halving) accumulation. Error grows O(log n)
// instead of O(n), which matters for the n^2-term dataset self-interaction
// constants. Fixed evaluation order: result does not depend on threading.
inline double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

// printf-style %.17g formatting: round-trips any finite double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace depmmd
