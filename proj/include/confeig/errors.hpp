#pragma once

#include <stdexcept>
#include <string>

namespace confeig {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A manifold or experiment specification violates its invariants.
class InvalidSpecError : public Error {
public:
    using Error::Error;
};

/// A field does not match the manifold it is used with.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A conformal factor (or other field required positive) is not positive.
class PositivityError : public Error {
public:
    using Error::Error;
};

/// An input is degenerate (identically zero field, empty list, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// An iterative routine failed numerically (NaN, non-convergence of a solver).
class NumericalFailureError : public Error {
public:
    using Error::Error;
};

/// A report was requested for a state that does not satisfy its precondition.
class StaleStateError : public Error {
public:
    using Error::Error;
};

/// Dimension outside the supported range (the critical exponent needs n >= 3).
class UnsupportedDimensionError : public Error {
public:
    using Error::Error;
};

/// File input/output failure; message carries the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace confeig
