#pragma once

#include <stdexcept>
#include <string>

namespace stabilens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// On-disk data does not follow the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Geometry with no usable extent (coincident cameras, empty clouds).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Linear solver failed to reach a usable residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed wire data (bad magic, version or length). The stream cannot continue.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Checksum mismatch. The connection should be reset.
class IntegrityError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Well-formed packet with unusable contents; only that packet is dropped.
class SemanticError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace stabilens
