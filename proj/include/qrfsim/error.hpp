#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qrfsim {

enum class ErrorCode {
  AllZeroAmplitudes,
  UnknownSystem,
  IndexOutOfRange,
  RegistryMismatch,
  InvalidState,
  ZeroVector,
  DegenerateAxis,
  SingularDecomposition,
  NotRigidlyRelated,
  MissingFrameRecord,
  TagMissing,
  NonDefiniteResult,
  NonInvertibleMap,
  NotDistancePreserving,
  PastSingularity,
  SingularityApproach,
  StepTooLarge,
  RelativisticVelocity,
  SuperluminalSample,
  GridTooCoarse,
  MassOnGrid,
  StrongField,
  ParseError,
  UnitError,
  ValidationError,
  MissingUncertainty,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZeroAmplitudes: return "AllZeroAmplitudes";
    case ErrorCode::UnknownSystem: return "UnknownSystem";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::RegistryMismatch: return "RegistryMismatch";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::SingularDecomposition: return "SingularDecomposition";
    case ErrorCode::NotRigidlyRelated: return "NotRigidlyRelated";
    case ErrorCode::MissingFrameRecord: return "MissingFrameRecord";
    case ErrorCode::TagMissing: return "TagMissing";
    case ErrorCode::NonDefiniteResult: return "NonDefiniteResult";
    case ErrorCode::NonInvertibleMap: return "NonInvertibleMap";
    case ErrorCode::NotDistancePreserving: return "NotDistancePreserving";
    case ErrorCode::PastSingularity: return "PastSingularity";
    case ErrorCode::SingularityApproach: return "SingularityApproach";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::RelativisticVelocity: return "RelativisticVelocity";
    case ErrorCode::SuperluminalSample: return "SuperluminalSample";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::MassOnGrid: return "MassOnGrid";
    case ErrorCode::StrongField: return "StrongField";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::MissingUncertainty: return "MissingUncertainty";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace qrfsim
