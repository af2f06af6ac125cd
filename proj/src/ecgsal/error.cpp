#include "ecgsal/error.hpp"

namespace ecgsal {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::LeadCountMismatch: return "LeadCountMismatch";
    case ErrorCode::TruncatedSignal: return "TruncatedSignal";
    case ErrorCode::ZeroGain: return "ZeroGain";
    case ErrorCode::MalformedAnnotationStream: return "MalformedAnnotationStream";
    case ErrorCode::NonBeatSymbol: return "NonBeatSymbol";
    case ErrorCode::NoBeatAnnotations: return "NoBeatAnnotations";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::BeatTooLong: return "BeatTooLong";
    case ErrorCode::TooFewBeats: return "TooFewBeats";
    case ErrorCode::UnknownRecordId: return "UnknownRecordId";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::UntrainedModel: return "UntrainedModel";
    case ErrorCode::NoIncorrectBeats: return "NoIncorrectBeats";
    case ErrorCode::MissingRecords: return "MissingRecords";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigConflict: return "ConfigConflict";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace ecgsal
