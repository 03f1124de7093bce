#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hullaudit {

enum class ErrorCode {
  EmptyTrainingSet,
  UnknownLevel,
  DimensionMismatch,
  ParseError,
  SchemaMismatch,
  SchemaError,
  ConfigError,
  NonPureProfile,
  InfeasibleDomain,
  MaxIterExceeded,
  NumericBreakdown,
  NoOutsideSamples,
  DegenerateClustering,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonPureProfile: return "NonPureProfile";
    case ErrorCode::InfeasibleDomain: return "InfeasibleDomain";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::NumericBreakdown: return "NumericBreakdown";
    case ErrorCode::NoOutsideSamples: return "NoOutsideSamples";
    case ErrorCode::DegenerateClustering: return "DegenerateClustering";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Process exit code used by the CLI for an error of this kind.
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InfeasibleDomain: return 2;
    case ErrorCode::ParseError: return 4;
    case ErrorCode::SchemaMismatch:
    case ErrorCode::SchemaError:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
    case ErrorCode::UnknownLevel:
    case ErrorCode::EmptyTrainingSet: return 3;
    default: return 1;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure carrying the 1-based input line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hullaudit
