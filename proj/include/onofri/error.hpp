#pragma once

#include <stdexcept>
#include <string>

namespace onofri {

enum class ErrorCode {
  InvalidParameter,
  ResolutionTooSmall,
  GeometryMismatch,
  UnsupportedGeometry,
  DomainError,
  ConstantField,
  NeedsElSolution,
  NewtonDiverged,
  NoSignChange,
  OptimizerStall,
  StepFailure,
  BlowupDetected,
  MassOutOfRange,
  NormalizationFailure,
  NotConverged,
  UnboundedVariation,
  ParseError,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// command-line front end can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for errors caused by bad user input rather than a numerical failure.
  bool is_argument_error() const noexcept {
    switch (code_) {
      case ErrorCode::InvalidParameter:
      case ErrorCode::ResolutionTooSmall:
      case ErrorCode::GeometryMismatch:
      case ErrorCode::UnsupportedGeometry:
      case ErrorCode::DomainError:
      case ErrorCode::MassOutOfRange:
      case ErrorCode::ParseError:
      case ErrorCode::NoSignChange:  // the scan interval violates its precondition
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::ResolutionTooSmall: return "resolution-too-small";
    case ErrorCode::GeometryMismatch: return "geometry-mismatch";
    case ErrorCode::UnsupportedGeometry: return "unsupported-geometry";
    case ErrorCode::DomainError: return "domain-error";
    case ErrorCode::ConstantField: return "constant-field";
    case ErrorCode::NeedsElSolution: return "needs-el-solution";
    case ErrorCode::NewtonDiverged: return "newton-diverged";
    case ErrorCode::NoSignChange: return "no-sign-change";
    case ErrorCode::OptimizerStall: return "optimizer-stall";
    case ErrorCode::StepFailure: return "step-failure";
    case ErrorCode::BlowupDetected: return "blowup-detected";
    case ErrorCode::MassOutOfRange: return "mass-out-of-range";
    case ErrorCode::NormalizationFailure: return "normalization-failure";
    case ErrorCode::NotConverged: return "not-converged";
    case ErrorCode::UnboundedVariation: return "unbounded-variation";
    case ErrorCode::ParseError: return "parse-error";
  }
  return "unknown";
}

}  // namespace onofri
