#pragma once

#include <stdexcept>
#include <string>

namespace hubs {

// Root of all library errors. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of operands do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A key (user id, day, parameter name) is absent.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or unreadable path.
class IoError : public Error {
 public:
  using Error::Error;
};

// A stored artifact does not match what the caller expects (shapes, magic).
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace hubs
