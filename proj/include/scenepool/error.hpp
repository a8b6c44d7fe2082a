#pragma once

#include <stdexcept>
#include <string>

namespace scenepool {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix shapes do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (feature files, bundles, manifests).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scenepool
