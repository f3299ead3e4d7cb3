#pragma once

#include <stdexcept>
#include <string>

namespace fuseshot {

// Error taxonomy. Everything derives from std::runtime_error so the CLI can
// map categories onto exit codes without a big catch ladder.

// Dimension mismatch between operands (e.g. matmul inner dims).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// API precondition violated (index out of range, backward on a non-scalar, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

// Malformed input file; message names the offending line where possible.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

// Semantically invalid configuration (bad counts, unknown names, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Non-finite value produced at runtime; message names the first bad node.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// Rows whose l2 norm falls below this pass through normalization unchanged.
inline constexpr double kNormEps = 1e-12;
// log(p + kLogEps) keeps log-likelihood terms finite at p == 0.
inline constexpr double kLogEps = 1e-12;

}  // namespace fuseshot
