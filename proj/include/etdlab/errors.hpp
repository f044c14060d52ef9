#pragma once

#include <stdexcept>
#include <string>

namespace etdlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed MDP, policy or configuration data.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// Power iteration did not settle; the chain is reducible or periodic.
class ReducibleChainError : public Error {
 public:
  using Error::Error;
};

/// A behavior probability of zero where the target needs coverage.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// (I - M) is singular: the discounted operator is not a contraction.
class NonContractiveError : public Error {
 public:
  using Error::Error;
};

/// The clipped mixture policy has an all-zero row.
class DegeneratePolicyError : public Error {
 public:
  using Error::Error;
};

}  // namespace etdlab
