#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sinsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of an operation
/// (zero-norm vector, non-positive temperature, non-finite cost, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The instance is well-formed but outside what a solver supports.
class UnsupportedInstance : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
 public:
  using FormatError::FormatError;
};

class CountMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a NaN or infinite loss term.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t step, std::string term)
      : Error("non-finite loss at step " + std::to_string(step) + " in term '" + term + "'"),
        step_(step),
        term_(std::move(term)) {}

  std::size_t step() const noexcept { return step_; }
  const std::string& term() const noexcept { return term_; }

 private:
  std::size_t step_;
  std::string term_;
};

}  // namespace sinsim
