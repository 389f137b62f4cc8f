#pragma once

#include <stdexcept>
#include <string>

namespace chemtab {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input outside the documented domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// Shape / length mismatch between arguments.
struct DimensionError : Error {
    using Error::Error;
};

// Inconsistent or degenerate configuration data.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed text input; message carries line/row/column context.
struct ParseError : Error {
    using Error::Error;
};

// Non-finite value produced by a numeric routine.
struct NumericError : Error {
    using Error::Error;
};

// Operation called out of sequence (e.g. backward before forward).
struct StateError : Error {
    using Error::Error;
};

// PDE solver failed hard (NaN state, first flame not converging).
struct SolverError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

} // namespace chemtab
