#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace sectorial {

enum class ErrorCode {
  TailNotDominated,
  QuadratureStall,
  KernelSingular,
  DomainViolation,
  AtomizationBudgetExceeded,
  ZeroDetected,
  LevyIntegrabilityViolated,
  UnknownBuiltin,
  BadParams,
  NotSectorial,
  SpectrumHit,
  NotInjective,
  ContourTooClose,
  SemigroupUnbounded,
  IllConditionedEigenbasis,
  KernelEmpty,
  BadSpec,
  InvalidMeasure,
  Unsupported,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::TailNotDominated: return "TailNotDominated";
    case ErrorCode::QuadratureStall: return "QuadratureStall";
    case ErrorCode::KernelSingular: return "KernelSingular";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::AtomizationBudgetExceeded: return "AtomizationBudgetExceeded";
    case ErrorCode::ZeroDetected: return "ZeroDetected";
    case ErrorCode::LevyIntegrabilityViolated: return "LevyIntegrabilityViolated";
    case ErrorCode::UnknownBuiltin: return "UnknownBuiltin";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::NotSectorial: return "NotSectorial";
    case ErrorCode::SpectrumHit: return "SpectrumHit";
    case ErrorCode::NotInjective: return "NotInjective";
    case ErrorCode::ContourTooClose: return "ContourTooClose";
    case ErrorCode::SemigroupUnbounded: return "SemigroupUnbounded";
    case ErrorCode::IllConditionedEigenbasis: return "IllConditionedEigenbasis";
    case ErrorCode::KernelEmpty: return "KernelEmpty";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sectorial
