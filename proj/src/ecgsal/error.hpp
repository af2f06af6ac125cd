#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgsal {

// Numeric values are mirrored by ecgsal_status in the public C header.
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 1,
  MalformedHeader = 10,
  UnsupportedFormat = 11,
  LeadCountMismatch = 12,
  TruncatedSignal = 13,
  ZeroGain = 14,
  MalformedAnnotationStream = 15,
  NonBeatSymbol = 16,
  NoBeatAnnotations = 20,
  EmptySegment = 21,
  BeatTooLong = 22,
  TooFewBeats = 23,
  UnknownRecordId = 24,
  EmptyClass = 25,
  InvalidConfig = 30,
  DivergedTraining = 31,
  ShapeMismatch = 32,
  CorruptCheckpoint = 33,
  LengthMismatch = 40,
  EmptyMatrix = 41,
  UntrainedModel = 50,
  NoIncorrectBeats = 51,
  MissingRecords = 60,
  MissingArtifact = 61,
  ConfigConflict = 62,
  Io = 70,
  Internal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace ecgsal
