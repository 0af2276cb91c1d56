#pragma once

#include <stdexcept>
#include <string>

namespace fairpart {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or ill-typed input text.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : Error(format(msg, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& msg, int line, int column) {
    if (line <= 0) return msg;
    return "line " + std::to_string(line) + ", column " +
           std::to_string(column) + ": " + msg;
  }

  int line_;
  int column_;
};

// A structural invariant of a transition system or a lasso was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Raised while executing an event system.
class EnumerationError : public Error {
 public:
  using Error::Error;
};

// The gluing invariant does not define a total function.
class GluingError : public Error {
 public:
  enum class Kind { kNonTotal, kNonFunctional, kUnresolved };

  GluingError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A configured resource budget was exhausted.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace fairpart
