#pragma once

#include <stdexcept>
#include <string>

namespace rrglm {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input (bad shapes, non-finite values, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation was asked for something it does not support (e.g. the
// scalar form of the quantile rule).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A numerical invariant was breached at run time.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Feature extraction from a rank-zero estimate.
class EmptyExtractionError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace rrglm
