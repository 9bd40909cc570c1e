#pragma once

#include <stdexcept>
#include <string>

namespace geoparam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

/// A direction vector with (numerically) zero length.
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

/// A weight vector whose norm is too small to define a boundary.
class DegenerateWeight : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class BatchTooSmall : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Every learning rate in a grid diverged.
class NoViableLearningRate : public Error {
 public:
  using Error::Error;
};

}  // namespace geoparam
