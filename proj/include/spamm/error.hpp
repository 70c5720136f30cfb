#pragma once

#include <stdexcept>
#include <string>

namespace spamm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operands with incompatible dimensions or block sizes.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A precondition on a scalar or configuration value was violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Malformed input file or failed write.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace spamm
