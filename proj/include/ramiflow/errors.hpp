#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ramiflow {

enum class ErrorCode {
  InvalidMeasure,
  MassImbalance,
  OutOfDomain,
  DomainError,
  InvalidCost,
  NonConcaveCost,
  InvalidGraph,
  CyclicGraph,
  ConservationViolation,
  InvalidPlan,
  InvalidArgument,
  TooLarge,
  UnsupportedDimension,
  ParseError,
};

// Stable machine-readable name, used by the CLI in error reports.
constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::MassImbalance: return "MassImbalance";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InvalidCost: return "InvalidCost";
    case ErrorCode::NonConcaveCost: return "NonConcaveCost";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::CyclicGraph: return "CyclicGraph";
    case ErrorCode::ConservationViolation: return "ConservationViolation";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ramiflow
