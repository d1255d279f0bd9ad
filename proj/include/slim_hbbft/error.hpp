#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace slim_hbbft {

enum class ErrorCode {
  NotThreeFPlusOne,
  KappaOutOfRange,
  ZeroBatchSize,
  ZeroSecurityParam,
  TooManyParties,
  PayloadTooLarge,
  Malformed,
  InsufficientShares,
  InvalidShare,
  InvalidCiphertext,
  KeyFileCorrupt,
  DuplicateStart,
  NotProposer,
  Abandoned,
  DoubleInput,
  EpochAlreadyActive,
  LivenessTimeout,
  ConfigInvalid,
  TraceMalformed,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotThreeFPlusOne: return "NotThreeFPlusOne";
    case ErrorCode::KappaOutOfRange: return "KappaOutOfRange";
    case ErrorCode::ZeroBatchSize: return "ZeroBatchSize";
    case ErrorCode::ZeroSecurityParam: return "ZeroSecurityParam";
    case ErrorCode::TooManyParties: return "TooManyParties";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::InsufficientShares: return "InsufficientShares";
    case ErrorCode::InvalidShare: return "InvalidShare";
    case ErrorCode::InvalidCiphertext: return "InvalidCiphertext";
    case ErrorCode::KeyFileCorrupt: return "KeyFileCorrupt";
    case ErrorCode::DuplicateStart: return "DuplicateStart";
    case ErrorCode::NotProposer: return "NotProposer";
    case ErrorCode::Abandoned: return "Abandoned";
    case ErrorCode::DoubleInput: return "DoubleInput";
    case ErrorCode::EpochAlreadyActive: return "EpochAlreadyActive";
    case ErrorCode::LivenessTimeout: return "LivenessTimeout";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::TraceMalformed: return "TraceMalformed";
  }
  return "Unknown";
}

/// Every failure raised by the library. `culprit` names the offending party
/// for InvalidShare.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<std::uint16_t> culprit = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), culprit_(culprit) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint16_t> culprit() const noexcept { return culprit_; }

 private:
  ErrorCode code_;
  std::optional<std::uint16_t> culprit_;
};

}  // namespace slim_hbbft
