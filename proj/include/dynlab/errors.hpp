#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynlab {

enum class ErrorKind {
  InvalidArgument,
  OutOfValidity,
  Overflow,
  Unsupported,
  NearZeroDivision,
  NonConvergence,
  ZeroOnContour,
  NonIntegerResidue,
  NormalizationError,
  InsufficientData,
  DegenerateT,
  BudgetExceeded,
  BadRadius,
  EmptyCandidate,
  EmptyAfterExclusion,
  NoConvergence,
  WrongBranch,
  CriticalSeed,
  DepthUnreachable,
  DegenerateFit,
  EmptyWindow,
  InjectivityViolation,
  ResolutionCap,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfValidity: return "OutOfValidity";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::NearZeroDivision: return "NearZeroDivision";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ZeroOnContour: return "ZeroOnContour";
    case ErrorKind::NonIntegerResidue: return "NonIntegerResidue";
    case ErrorKind::NormalizationError: return "NormalizationError";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DegenerateT: return "DegenerateT";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::BadRadius: return "BadRadius";
    case ErrorKind::EmptyCandidate: return "EmptyCandidate";
    case ErrorKind::EmptyAfterExclusion: return "EmptyAfterExclusion";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::WrongBranch: return "WrongBranch";
    case ErrorKind::CriticalSeed: return "CriticalSeed";
    case ErrorKind::DepthUnreachable: return "DepthUnreachable";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::InjectivityViolation: return "InjectivityViolation";
    case ErrorKind::ResolutionCap: return "ResolutionCap";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace dynlab
