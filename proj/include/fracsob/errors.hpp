#pragma once

#include <stdexcept>
#include <string>

namespace fracsob {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A radial projection was requested at a point where it is undefined
/// (face centers, the dual skeleton, singular planes of a field).
class ExceptionalPoint : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class SingularPoint : public Error {
 public:
  using Error::Error;
};

class OutsideTube : public Error {
 public:
  using Error::Error;
};

class Undersampled : public Error {
 public:
  using Error::Error;
};

class WindowEscapes : public Error {
 public:
  using Error::Error;
};

class TubeEscape : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracsob
