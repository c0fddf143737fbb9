#pragma once

#include <stdexcept>
#include <string>

namespace propd {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed mesh, database or query file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Degenerate or otherwise unusable geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Persisted data does not belong to the meshes it is used with.
class DataMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace propd
