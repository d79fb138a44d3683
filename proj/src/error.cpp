#include "sldml/error.hpp"

namespace sldml {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicatePath: return "DuplicatePath";
    case ErrorCode::TargetTooLarge: return "TargetTooLarge";
    case ErrorCode::ZeroTarget: return "ZeroTarget";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::NameCollision: return "NameCollision";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InsufficientClassSamples: return "InsufficientClassSamples";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::ShapeManifestMismatch: return "ShapeManifestMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ReferenceNotFound: return "ReferenceNotFound";
    case ErrorCode::AmbiguousReference: return "AmbiguousReference";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::NoQueries: return "NoQueries";
    case ErrorCode::KeepOutOfRange: return "KeepOutOfRange";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InvalidProtocol: return "InvalidProtocol";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace sldml
