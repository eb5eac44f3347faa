#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gbsde {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (n <= L, nx < 3, r < 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Tokenizer / parser failure. `offset` is the byte offset into the source.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Expression evaluation hit a domain error (division by zero, sqrt of a
/// negative, non-finite result).
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver (non-finite values, unreachable target).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Configuration failure; `pointer` is a JSON pointer to the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace gbsde
