#pragma once

#include <stdexcept>
#include <string>

namespace negadapt {

// Error categories map to CLI exit codes: config 2, numeric 3, I/O 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct NonHermitianError : NumericError {
  using NumericError::NumericError;
};

struct NoConvergenceError : NumericError {
  using NumericError::NumericError;
};

struct ShapeMismatchError : NumericError {
  using NumericError::NumericError;
};

struct DimensionMismatchError : NumericError {
  using NumericError::NumericError;
};

struct NotScalarError : NumericError {
  using NumericError::NumericError;
};

struct LengthMismatchError : NumericError {
  using NumericError::NumericError;
};

struct EmptySetError : NumericError {
  using NumericError::NumericError;
};

struct DegenerateDenominatorError : NumericError {
  using NumericError::NumericError;
};

struct InsufficientSamplesError : NumericError {
  using NumericError::NumericError;
};

struct BadIterationCountError : ConfigError {
  using ConfigError::ConfigError;
};

struct BasisListTooShortError : ConfigError {
  using ConfigError::ConfigError;
};

struct ChecksumMismatchError : IoError {
  using IoError::IoError;
};

}  // namespace negadapt
