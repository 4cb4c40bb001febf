#pragma once

#include <stdexcept>
#include <string>

namespace dsdh {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands do not agree. A programmer error.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid or unknown configuration key / value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or dataset that violates its invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

// Factorization failure or a non-finite value during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dsdh
