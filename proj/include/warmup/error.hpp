#pragma once

#include <exception>
#include <string>
#include <utility>

namespace warmup {

// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  Argument,
  Config,
  Io,
  Format,
  Length,
  Validation,
  Degenerate,
  Convergence,
  Range,
};

class Error : public std::exception {
 public:
  Error(ErrorKind kind, std::string what) : message_(std::move(what)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  const char* what() const noexcept override { return message_.c_str(); }
  // Adds context (e.g. the pipeline stage) in front of the message; the
  // exception can then be rethrown with its dynamic type intact.
  void prepend(const std::string& context) { message_ = context + ": " + message_; }

 private:
  std::string message_;
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Argument, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::Format, w) {}
};
struct LengthError : Error {
  explicit LengthError(const std::string& w) : Error(ErrorKind::Length, w) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& w) : Error(ErrorKind::Degenerate, w) {}
};
struct ConvergenceError : Error {
  ConvergenceError(const std::string& w, double residual)
      : Error(ErrorKind::Convergence, w), residual(residual) {}
  double residual;
};
struct RangeError : Error {
  RangeError(const std::string& w, double lo, double hi) : Error(ErrorKind::Range, w), lo(lo), hi(hi) {}
  double lo;
  double hi;
};

}  // namespace warmup
