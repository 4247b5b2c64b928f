#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace staple {

/// Base class for every error the library raises on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ValidationError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Persisted data failed a checksum or consistency check.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Parameters that cannot be combined (e.g. m larger than the series).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace staple
