#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace na {

// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& msg, std::size_t offset)
      : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownVariable : public Error {
 public:
  using Error::Error;
};

class UnsupportedFunction : public Error {
 public:
  using Error::Error;
};

// A partial function (sqrt, division) was applied outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ModelDomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericalInstability : public Error {
 public:
  using Error::Error;
};

class DegenerateBox : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ModeExplosion : public Error {
 public:
  using Error::Error;
};

class OrderOverflow : public Error {
 public:
  using Error::Error;
};

class UnsupportedShape : public Error {
 public:
  using Error::Error;
};

class SingularSimplex : public Error {
 public:
  using Error::Error;
};

}  // namespace na
