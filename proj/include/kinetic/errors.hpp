#pragma once

#include <stdexcept>
#include <string>

namespace kinetic {

enum class ErrorCode {
  NegativeKernel,
  DegenerateColumn,
  InconclusiveRefinement,
  NegativeTime,
  NearSingularDenominator,
  NoConvergence,
  EigenvalueLeftDisc,
  ContourHitsSpectrum,
  SeparationFailure,
  NonNegativeResult,
  NonZeroMean,
  InconsistentLimit,
  IntegratorFailure,
  QuadratureFailure,
  SingularSolve,
  TailTooLarge,
  EmptyEnsemble,
  InsufficientPoints,
  UnboundedInitialData,
  InvalidArgument,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

class KineticError : public std::runtime_error {
 public:
  KineticError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw KineticError(code, message);
}

}  // namespace kinetic
