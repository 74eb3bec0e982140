#pragma once

#include <stdexcept>
#include <string>

namespace cn2 {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unrecognized or malformed file layout (bad header, unknown columns).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Physically impossible or out-of-contract values in otherwise readable input.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Too few samples/levels to carry out the requested computation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Inconsistent parameters, mismatched grids, misaligned separations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Quadrature or optimizer failed to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (missing path, unwritable output).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cn2
