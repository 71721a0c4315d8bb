#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hartree {

/// Failure categories raised by the library. Each maps onto one named
/// error condition of a module contract.
enum class ErrorKind {
  InvalidDimension,
  InvalidResolution,
  NonFiniteValue,
  GridMismatch,
  KernelTooWide,
  NegativeRadius,
  UnsupportedDimension,
  InvalidTimeStep,
  InvalidArgument,
  IndexOutOfRange,
  MollifierUnderResolved,
  InfeasibleInit,
  UnstableStep,
  NonPositiveMass,
  NotNormalized,
  NoProgress,
  PositiveTilt,
  DivergedObjective,
  InfeasibleTrap,
  NonConvergent,
  AllWeightsZero,
  ConfigInvalid,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::InvalidResolution: return "InvalidResolution";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::KernelTooWide: return "KernelTooWide";
    case ErrorKind::NegativeRadius: return "NegativeRadius";
    case ErrorKind::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorKind::InvalidTimeStep: return "InvalidTimeStep";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::MollifierUnderResolved: return "MollifierUnderResolved";
    case ErrorKind::InfeasibleInit: return "InfeasibleInit";
    case ErrorKind::UnstableStep: return "UnstableStep";
    case ErrorKind::NonPositiveMass: return "NonPositiveMass";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::NoProgress: return "NoProgress";
    case ErrorKind::PositiveTilt: return "PositiveTilt";
    case ErrorKind::DivergedObjective: return "DivergedObjective";
    case ErrorKind::InfeasibleTrap: return "InfeasibleTrap";
    case ErrorKind::NonConvergent: return "NonConvergent";
    case ErrorKind::AllWeightsZero: return "AllWeightsZero";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace hartree
