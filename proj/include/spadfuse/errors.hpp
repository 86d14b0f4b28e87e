#pragma once

#include <stdexcept>
#include <string>

namespace spadfuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or unreadable configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, inconsistent or out-of-range data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

class RangeError : public DataError {
public:
    using DataError::DataError;
};

/// Timestamps arrived out of order.
class OrderingError : public DataError {
public:
    using DataError::DataError;
};

/// Not enough binary frames to fill an aggregation window.
class UnderflowError : public DataError {
public:
    using DataError::DataError;
};

/// Flux at or beyond the dead-time asymptote 1/tau.
class SaturationError : public DataError {
public:
    using DataError::DataError;
};

/// Root finding failed (CLI exit code 4).
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace spadfuse
