#pragma once

#include <stdexcept>
#include <string>

namespace xmt {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's mathematical domain (log of <= 0, p >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in a tensor or loss.
class NonFiniteError : public Error {
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

// Malformed or incompatible on-disk data (checkpoints, manifests).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace xmt
