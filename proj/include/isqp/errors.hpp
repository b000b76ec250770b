#pragma once

#include <stdexcept>
#include <string>

namespace isqp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class AsymmetricHessian : public Error {
 public:
  using Error::Error;
};

class IndefiniteHessian : public Error {
 public:
  using Error::Error;
};

/// The condensed Newton matrix could not be factorized even after diagonal
/// perturbation.
class FactorizationFailure : public Error {
 public:
  using Error::Error;
};

/// Backtracking exhausted without objective decrease and the duality measure
/// did not decrease either.
class StallError : public Error {
 public:
  using Error::Error;
};

class SizeLimit : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed.
class AssertionFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace isqp
