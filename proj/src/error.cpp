#include "birkhoff/error.hpp"

namespace birkhoff {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::OverlappingDomains: return "OverlappingDomains";
    case ErrorCode::IncompleteCover: return "IncompleteCover";
    case ErrorCode::NonMonotoneBranch: return "NonMonotoneBranch";
    case ErrorCode::RangeEscape: return "RangeEscape";
    case ErrorCode::UnreachableTolerance: return "UnreachableTolerance";
    case ErrorCode::OrbitHitsBreakpoint: return "OrbitHitsBreakpoint";
    case ErrorCode::OrbitLeavesDomain: return "OrbitLeavesDomain";
    case ErrorCode::NotMarkov: return "NotMarkov";
    case ErrorCode::TrivialCore: return "TrivialCore";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BracketOverflow: return "BracketOverflow";
    case ErrorCode::NotInH: return "NotInH";
    case ErrorCode::ParabolicValueOutsideH: return "ParabolicValueOutsideH";
    case ErrorCode::InfeasibleConstraint: return "InfeasibleConstraint";
    case ErrorCode::OutOfHull: return "OutOfHull";
    case ErrorCode::MeshTooLarge: return "MeshTooLarge";
    case ErrorCode::InfeasibleSchedule: return "InfeasibleSchedule";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::CapExceeded: return "CapExceeded";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::ConfigError:
    case ErrorCode::OverlappingDomains:
    case ErrorCode::IncompleteCover:
    case ErrorCode::NonMonotoneBranch:
    case ErrorCode::RangeEscape:
    case ErrorCode::NotMarkov:
    case ErrorCode::TrivialCore:
    case ErrorCode::ParabolicValueOutsideH:
    case ErrorCode::OutOfHull:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, std::string module, std::string operation,
             const std::string& message)
    : std::runtime_error(module + "::" + operation + ": " + to_string(code) +
                         (message.empty() ? "" : " (" + message + ")")),
      code_(code),
      module_(std::move(module)),
      operation_(std::move(operation)),
      detail_(message) {}

}  // namespace birkhoff
