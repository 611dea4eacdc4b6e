#include "vimu/errors.hpp"

namespace vimu {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NoNullspace: return "NoNullspace";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::Misaligned: return "Misaligned";
    case ErrorKind::InvalidDt: return "InvalidDt";
    case ErrorKind::StreamExhausted: return "StreamExhausted";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vimu
