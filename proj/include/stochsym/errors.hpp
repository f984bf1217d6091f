#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochsym {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A model file that is not valid JSON or does not follow the schema.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Division by zero, sqrt/log of a negative number, or a non-finite value.
class UndefinedAtPoint : public Error {
 public:
  using Error::Error;
};

/// Every sample point was undefined, so a vanishing test has no evidence.
class UndecidableError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numeric flow left the domain; carries the parameter value at which it happened.
class FlowExitError : public DomainError {
 public:
  FlowExitError(const std::string& what, double parameter)
      : DomainError(what + " (exit at a=" + std::to_string(parameter) + ")"), parameter_(parameter) {}

  double parameter() const noexcept { return parameter_; }

 private:
  double parameter_;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class NonCommutingBasisError : public Error {
 public:
  using Error::Error;
};

/// A basis element handed to closure_check is not a symmetry.
class NotASymmetryError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace stochsym
