#pragma once

#include <stdexcept>
#include <string>

namespace dotcav {

// Bad inputs: wrong configuration, broken invariants, malformed files.
// CLI maps these to exit code 1.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Drive configuration with both raw amplitudes active, or channel/amplitude
// mismatch.
struct InvalidConfigurationError : ValidationError {
    using ValidationError::ValidationError;
};

// Schrieffer-Wolff evaluation at f_q == f_r.
struct ResonanceSingularityError : ValidationError {
    using ValidationError::ValidationError;
};

// Degenerate stability-diagram slopes; message names the failing denominator.
struct SingularGeometryError : ValidationError {
    using ValidationError::ValidationError;
};

// File-format problems (bad header, version mismatch, non-monotone axis).
struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};
struct SchemaVersionError : ParseError {
    using ParseError::ParseError;
};

// Numerical failures. CLI maps non-convergence to exit code 2.
struct IntegratorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncationLeakError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dotcav
