#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vio {

enum class ErrorCode {
  BehindCamera,
  AngleNearPi,
  EmptyStream,
  NonMonotonicTime,
  SingularNormalEquations,
  NumericalFailure,
  DegenerateBaseline,
  InsufficientLandmarks,
  DatasetFormatError,
  ConfigError,
  NoAssociation,
  TooFewPoses,
  MismatchedDatasets,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::InsufficientLandmarks: return "InsufficientLandmarks";
    case ErrorCode::DatasetFormatError: return "DatasetFormatError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoAssociation: return "NoAssociation";
    case ErrorCode::TooFewPoses: return "TooFewPoses";
    case ErrorCode::MismatchedDatasets: return "MismatchedDatasets";
  }
  return "Unknown";
}

/// Library-wide exception; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vio
