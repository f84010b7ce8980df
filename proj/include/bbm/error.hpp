#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bbm {

enum class ErrorCode {
  MeanNotTwo,
  NotAProbability,
  ZeroOffspringMass,
  InvalidConfig,
  TruncationAfterNow,
  ParticleCapExceeded,
  DegenerateSegment,
  NonpositiveTime,
  BadWindow,
  InsufficientPath,
  OutOfWindow,
  NegativeMass,
  BadArgs,
  NoConvergence,
  NoBracket,
  Blowup,
  AllExtinct,
  DegenerateFit,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MeanNotTwo: return "MeanNotTwo";
    case ErrorCode::NotAProbability: return "NotAProbability";
    case ErrorCode::ZeroOffspringMass: return "ZeroOffspringMass";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TruncationAfterNow: return "TruncationAfterNow";
    case ErrorCode::ParticleCapExceeded: return "ParticleCapExceeded";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::NonpositiveTime: return "NonpositiveTime";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::InsufficientPath: return "InsufficientPath";
    case ErrorCode::OutOfWindow: return "OutOfWindow";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::BadArgs: return "BadArgs";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::Blowup: return "Blowup";
    case ErrorCode::AllExtinct: return "AllExtinct";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bbm
