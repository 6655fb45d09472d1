// Error types shared across the library. Each maps to a CLI exit class:
// ConfigError -> 2, the physics/fit errors -> 3.
#pragma once

#include <stdexcept>
#include <string>

namespace etrap {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Drive parameters violate their preconditions (e.g. non-positive
/// drive frequency).
struct InvalidDriveError : Error {
    using Error::Error;
};

/// (a, q) lies outside the lowest Mathieu stability region.
struct InstabilityError : Error {
    using Error::Error;
};

/// A requested time step is too coarse to resolve the dynamics.
struct ResolutionError : Error {
    using Error::Error;
};

/// A spectral estimate found no oscillation above the noise floor.
struct NoOscillationError : Error {
    using Error::Error;
};

/// Argument outside a model's validity range.
struct OutOfRangeError : Error {
    using Error::Error;
};

/// A least-squares fit failed (rank deficiency, divergence, no peak).
struct FitError : Error {
    using Error::Error;
};

/// Sequence program violates its invariants.
struct ProgramError : Error {
    using Error::Error;
};

/// Run-config file could not be parsed or validated.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace etrap
