#pragma once

#include <stdexcept>
#include <string>

namespace birkhoff {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  ConfigError,
  OverlappingDomains,
  IncompleteCover,
  NonMonotoneBranch,
  RangeEscape,
  UnreachableTolerance,
  OrbitHitsBreakpoint,
  OrbitLeavesDomain,
  NotMarkov,
  TrivialCore,
  NoConvergence,
  BracketOverflow,
  NotInH,
  ParabolicValueOutsideH,
  InfeasibleConstraint,
  OutOfHull,
  MeshTooLarge,
  InfeasibleSchedule,
  EmptySelection,
  CapExceeded,
};

const char* to_string(ErrorCode code);

// True for errors caused by bad input rather than by a numerical failure.
bool is_validation_error(ErrorCode code);

// Every error carries the module and operation that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, std::string operation,
        const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string module_;
  std::string operation_;
  std::string detail_;
};

}  // namespace birkhoff
