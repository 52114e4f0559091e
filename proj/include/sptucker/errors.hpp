#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sptucker {

/// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& source = {})
      : std::runtime_error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + what),
        detail_(what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

/// Input that parses but violates a domain constraint (coordinate < 1, non-finite value, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up (factor rows vs. coordinates, matrix sizes).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration (rank counts, core lengths, invocation counts).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sptucker
