#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace majgn {

enum class ErrorCode {
  InvalidArgument,
  RankDeficient,
  Singular,
  SingularB,
  OutOfDomain,
  OutOfRadius,
  NotFound,
  QuadratureFailure,
  PolicyInfeasible,
  UnknownProblem,
  AnnotationInvalid,
  BoundViolated,
  InsufficientData,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::SingularB: return "SingularB";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::OutOfRadius: return "OutOfRadius";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::PolicyInfeasible: return "PolicyInfeasible";
    case ErrorCode::UnknownProblem: return "UnknownProblem";
    case ErrorCode::AnnotationInvalid: return "AnnotationInvalid";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace majgn
