#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace domino {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the byte offset where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A caller broke a documented precondition (shape mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Configuration or user input rejected before any work was done.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during a run (NaN loss, rejection sampling exhausted, ...).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace domino
