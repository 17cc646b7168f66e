#pragma once

#include <stdexcept>
#include <string>

namespace decomp {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (dimensions, non-finite entries, bad
/// parameters, unparsable configuration).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An eigenvalue sits too close to the unit circle for the contraction
/// subspace to be classified reliably.
class SpectralGapError : public Error {
 public:
  SpectralGapError(const std::string& what, double modulus)
      : Error(what), modulus_(modulus) {}
  double modulus() const noexcept { return modulus_; }

 private:
  double modulus_;
};

/// A structural hypothesis (usually invertibility of the map) fails.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Two independent routes produced contradicting verdicts.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A numerical construction did not reach its convergence diagnostic.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace decomp
