#pragma once

#include <stdexcept>
#include <string>

namespace veil {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
struct ShapeError : Error {
    using Error::Error;
};

/// Numeric failure: singular matrix, exhausted rejection budget, non-finite values.
struct NumericError : Error {
    using Error::Error;
};

/// Protocol contract violation: crossing budget, mask-tag mismatch, bad session state.
struct ProtocolError : Error {
    using Error::Error;
};

/// Malformed, truncated or corrupt serialized data.
struct IoError : Error {
    using Error::Error;
};

}  // namespace veil
