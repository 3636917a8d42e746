#pragma once

#include <stdexcept>
#include <string>

namespace marflow {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or extents that do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed, or an argument outside an op's domain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Scan geometry that cannot measure or reconstruct the requested object.
class GeometryError : public Error {
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

// Training produced non-finite losses and was aborted.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace marflow
