#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace rci {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record. `line` is 1-based; 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally valid input that violates a domain invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or index file that cannot be used with the running code/model.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Embedding index built from a different model than the one in use.
class StaleIndexError : public Error {
 public:
  using Error::Error;
};

// Aggregation over a selection with no numeric cells.
class UnanswerableError : public Error {
 public:
  using Error::Error;
};

}  // namespace rci
