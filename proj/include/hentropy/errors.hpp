#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hentropy {

enum class ErrorKind {
  InvalidArgument,
  EnclosureOverflow,
  EmptyCover,
  BudgetExceeded,
  IsolationFailure,
  EmptyInvariantSet,
  NonAcyclicCarrier,
  ChainSolveFailure,
  Unverifiable,
  ConditionNotSatisfied,
  SearchBudgetExceeded,
  NotDecided,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::EnclosureOverflow: return "enclosure_overflow";
    case ErrorKind::EmptyCover: return "empty_cover";
    case ErrorKind::BudgetExceeded: return "budget_exceeded";
    case ErrorKind::IsolationFailure: return "isolation_failure";
    case ErrorKind::EmptyInvariantSet: return "empty_invariant_set";
    case ErrorKind::NonAcyclicCarrier: return "non_acyclic_carrier";
    case ErrorKind::ChainSolveFailure: return "chain_solve_failure";
    case ErrorKind::Unverifiable: return "unverifiable";
    case ErrorKind::ConditionNotSatisfied: return "condition_not_satisfied";
    case ErrorKind::SearchBudgetExceeded: return "search_budget_exceeded";
    case ErrorKind::NotDecided: return "not_decided";
    case ErrorKind::ParseError: return "parse_error";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the sweep
/// driver in particular) can map it onto a structured outcome.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hentropy
