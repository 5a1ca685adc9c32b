#pragma once

#include <stdexcept>
#include <string>

namespace segwise {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data is unusable (non-finite values, malformed files, degenerate series).
class DataError : public Error {
public:
    using Error::Error;
};

/// A parameter or configuration value is invalid.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An index range, split point or shift lies outside the admissible set.
class RangeError : public Error {
public:
    using Error::Error;
};

} // namespace segwise
