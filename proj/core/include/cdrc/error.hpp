#pragma once

#include <stdexcept>
#include <string>

namespace cdrc {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column roles or sidecar schema inconsistent with the data or with themselves.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV / JSON input.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A learner or density model could not be fitted.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Estimator configuration is incomplete or contradictory.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied argument (CLI flags, grid specs, etc.).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdrc
