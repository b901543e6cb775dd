#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bondlab {

enum class ErrorKind {
  // validation
  ConfigInvalid,
  GridMismatch,
  AtomBeyondGrid,
  OrderUnsupported,
  NonPositiveInitialCurve,
  AdaptednessViolation,
  OutOfDomain,
  BudgetInfeasible,
  UnsupportedUtility,
  // numerical
  ArbitrageDetected,
  DegenerateCurve,
  OutOfRange,
  BracketFailure,
  ConditionCFails,
  DecompositionFails,
  DegenerateConcavity,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for errors caused by bad input rather than by the numerics.
bool is_validation(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Scenario field the error refers to, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message,
                              std::string field = {}) {
  throw Error(kind, message, std::move(field));
}

}  // namespace bondlab
