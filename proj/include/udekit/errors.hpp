#pragma once

#include <stdexcept>
#include <string>

namespace udekit {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (message names the operation and both shapes).
struct ShapeError : Error {
    using Error::Error;
};

// Math domain violation (log of a non-positive value, ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid argument to an operation (bad dt, mismatched Brownian path, ...).
struct ParamError : Error {
    using Error::Error;
};

// Solver produced a non-finite state; message carries the step index.
struct IntegrationError : Error {
    using Error::Error;
};

// Run configuration failed schema validation.
struct ConfigError : Error {
    using Error::Error;
};

// Dataset contents violate the data contract (negative Poisson counts, ...).
struct DataError : Error {
    using Error::Error;
};

// Training aborted; message carries epoch/batch diagnostics.
struct TrainError : Error {
    using Error::Error;
};

} // namespace udekit
