#include "bondlab/error.hpp"

namespace bondlab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::AtomBeyondGrid: return "AtomBeyondGrid";
    case ErrorKind::OrderUnsupported: return "OrderUnsupported";
    case ErrorKind::NonPositiveInitialCurve: return "NonPositiveInitialCurve";
    case ErrorKind::AdaptednessViolation: return "AdaptednessViolation";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::BudgetInfeasible: return "BudgetInfeasible";
    case ErrorKind::UnsupportedUtility: return "UnsupportedUtility";
    case ErrorKind::ArbitrageDetected: return "ArbitrageDetected";
    case ErrorKind::DegenerateCurve: return "DegenerateCurve";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::ConditionCFails: return "ConditionCFails";
    case ErrorKind::DecompositionFails: return "DecompositionFails";
    case ErrorKind::DegenerateConcavity: return "DegenerateConcavity";
  }
  return "Unknown";
}

bool is_validation(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::GridMismatch:
    case ErrorKind::AtomBeyondGrid:
    case ErrorKind::OrderUnsupported:
    case ErrorKind::NonPositiveInitialCurve:
    case ErrorKind::AdaptednessViolation:
    case ErrorKind::OutOfDomain:
    case ErrorKind::BudgetInfeasible:
    case ErrorKind::UnsupportedUtility:
      return true;
    default:
      return false;
  }
}

}  // namespace bondlab
