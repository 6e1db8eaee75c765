#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace storyframe {

enum class Errc {
  // usage / argument errors
  InvalidArgument,
  // scene script
  MissingSection,
  DuplicateSection,
  DuplicateCharacter,
  UnknownShotSize,
  NonContiguousShotIndices,
  StrayText,
  InvalidPlan,
  // planning
  MissingExemplars,
  InvalidExemplar,
  PlanningFailed,
  // codec
  DegenerateImage,
  InvalidLayout,
  HeightMismatch,
  WidthMismatch,
  EmptyFrameList,
  InsufficientHeight,
  InconsistentReport,
  EmptyInput,
  // generation
  InvalidWidth,
  DimensionViolation,
  // evaluation
  LengthMismatch,
  TooFewFrames,
  EmptySequence,
  MalformedVerdict,
  // dataset
  InsufficientSupply,
  OutOfBounds,
  EmptyBox,
  UnknownLabel,
  // backends
  BackendError,
  BackendContract,
  // persistence / io
  IoError,
  DecodeError,
  NotFound,
  InvalidTransition,
};

enum class ErrorCategory { Usage, Validation, Backend, Io };

std::string_view to_string(Errc code);
ErrorCategory category(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace storyframe
