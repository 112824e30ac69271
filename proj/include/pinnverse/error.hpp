#pragma once

#include <stdexcept>
#include <string>

namespace pinnverse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (arguments, configs, files).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a primal value, a loss or a gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Forward solver could not satisfy its error control or stability checks.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration rejected during validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pinnverse
