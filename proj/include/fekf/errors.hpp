#pragma once

#include <stdexcept>
#include <string>

namespace fekf {

/// Numerical failure in a factorization or solve that should not occur for
/// well-posed inputs (singular system, non-convergent iteration).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A query point lies outside the meshed domain.
struct OutOfDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The requested overlapping decomposition cannot satisfy the interface
/// assignment rules (some interface vertex is interior to no neighbor).
struct DecompositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A node computed a consensus round without the full set of neighbor
/// messages for that round.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed configuration file; carries the offending line number (1-based,
/// 0 when not tied to a specific line).
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& msg, int line_no = 0)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg
                                         : msg),
          line(line_no) {}
    int line;
};

}  // namespace fekf
