#pragma once

#include <stdexcept>
#include <string>

namespace gridcast {

/// Base class for all recoverable gridcast failures.
class Error : public std::runtime_error {
  public:
    explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Raised by the structured-text parsers; carries a 1-based position.
class ParseError : public Error {
  public:
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

  private:
    int line_;
    int column_;
};

}  // namespace gridcast
