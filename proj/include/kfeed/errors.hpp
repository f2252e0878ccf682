#pragma once

#include <stdexcept>
#include <string>

namespace kfeed {

/// Invalid index, dimension mismatch or out-of-range parameter.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation called on an object that is not ready for it (empty dataset, non-positive eigenvalue).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Enumeration or state-space size guard exceeded.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                           ": " + what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, double agreement)
      : std::runtime_error(what), agreement_(agreement) {}

  double agreement() const { return agreement_; }

 private:
  double agreement_;
};

}  // namespace kfeed
