#pragma once

#include <stdexcept>
#include <string>

namespace ddsf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Values outside an operation's domain (inverted bounds, indefinite cost,
/// non-positive sample time, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class WindowTooLong : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PeCheckError : public Error {
 public:
  PeCheckError(const std::string& what, long rank, long required)
      : Error(what), rank_(rank), required_(required) {}

  long rank() const { return rank_; }
  long required() const { return required_; }

 private:
  long rank_;
  long required_;
};

}  // namespace ddsf
