#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace netlabel {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems in the labeling configuration (ontology or rules). line() is
// 1-based, 0 when the problem is not tied to a line.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::size_t line = 0)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Malformed Zeek log input or other data files.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message, std::size_t line = 0)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// The caller passed arguments that violate an operation's preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace netlabel
