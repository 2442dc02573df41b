#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qgprobe {

enum class ErrorCode {
  StepTooLarge,
  NonFinite,
  InsufficientData,
  NegativeOccupancy,
  OutsidePerturbativeRegime,
  OutsideLinearRegime,
  InvalidDamping,
  RatioUndefined,
  ExcitationTooStrong,
  NyquistViolation,
  DurationTooShort,
  FilterUnstable,
  SegmentTooLong,
  FitDiverged,
  PeakNotResolved,
  WindowOutOfRange,
  DegenerateSpan,
  BaseFitInvalid,
  WindowOverlap,
  TooFewSamples,
  UncalibratedCampaign,
  InvalidArgument,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NegativeOccupancy: return "NegativeOccupancy";
    case ErrorCode::OutsidePerturbativeRegime: return "OutsidePerturbativeRegime";
    case ErrorCode::OutsideLinearRegime: return "OutsideLinearRegime";
    case ErrorCode::InvalidDamping: return "InvalidDamping";
    case ErrorCode::RatioUndefined: return "RatioUndefined";
    case ErrorCode::ExcitationTooStrong: return "ExcitationTooStrong";
    case ErrorCode::NyquistViolation: return "NyquistViolation";
    case ErrorCode::DurationTooShort: return "DurationTooShort";
    case ErrorCode::FilterUnstable: return "FilterUnstable";
    case ErrorCode::SegmentTooLong: return "SegmentTooLong";
    case ErrorCode::FitDiverged: return "FitDiverged";
    case ErrorCode::PeakNotResolved: return "PeakNotResolved";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::DegenerateSpan: return "DegenerateSpan";
    case ErrorCode::BaseFitInvalid: return "BaseFitInvalid";
    case ErrorCode::WindowOverlap: return "WindowOverlap";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::UncalibratedCampaign: return "UncalibratedCampaign";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can emit a machine-readable record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qgprobe
