#include "storyframe/error.hpp"

namespace storyframe {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MissingSection: return "MissingSection";
    case Errc::DuplicateSection: return "DuplicateSection";
    case Errc::DuplicateCharacter: return "DuplicateCharacter";
    case Errc::UnknownShotSize: return "UnknownShotSize";
    case Errc::NonContiguousShotIndices: return "NonContiguousShotIndices";
    case Errc::StrayText: return "StrayText";
    case Errc::InvalidPlan: return "InvalidPlan";
    case Errc::MissingExemplars: return "MissingExemplars";
    case Errc::InvalidExemplar: return "InvalidExemplar";
    case Errc::PlanningFailed: return "PlanningFailed";
    case Errc::DegenerateImage: return "DegenerateImage";
    case Errc::InvalidLayout: return "InvalidLayout";
    case Errc::HeightMismatch: return "HeightMismatch";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::EmptyFrameList: return "EmptyFrameList";
    case Errc::InsufficientHeight: return "InsufficientHeight";
    case Errc::InconsistentReport: return "InconsistentReport";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidWidth: return "InvalidWidth";
    case Errc::DimensionViolation: return "DimensionViolation";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::MalformedVerdict: return "MalformedVerdict";
    case Errc::InsufficientSupply: return "InsufficientSupply";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::EmptyBox: return "EmptyBox";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::BackendError: return "BackendError";
    case Errc::BackendContract: return "BackendContract";
    case Errc::IoError: return "IoError";
    case Errc::DecodeError: return "DecodeError";
    case Errc::NotFound: return "NotFound";
    case Errc::InvalidTransition: return "InvalidTransition";
  }
  return "Unknown";
}

ErrorCategory category(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
      return ErrorCategory::Usage;
    case Errc::BackendError:
    case Errc::BackendContract:
    case Errc::PlanningFailed:
      return ErrorCategory::Backend;
    case Errc::IoError:
    case Errc::DecodeError:
    case Errc::NotFound:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Validation;
  }
}

}  // namespace storyframe
