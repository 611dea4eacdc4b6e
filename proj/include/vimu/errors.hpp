#pragma once

#include <stdexcept>
#include <string>

namespace vimu {

enum class ErrorKind {
  InvalidArgument,
  RankDeficient,
  NoNullspace,
  DegenerateGeometry,
  CountMismatch,
  Misaligned,
  InvalidDt,
  StreamExhausted,
  OutOfRange,
  ConfigInvalid,
  ParseError,
  SchemaError,
  FormatError,
  EmptyIntersection,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; the kind tells callers (and the
/// CLI exit-code mapping) what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vimu
