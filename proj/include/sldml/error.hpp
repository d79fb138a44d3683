#ifndef SLDML_ERROR_HPP_
#define SLDML_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace sldml {

enum class ErrorCode {
  MissingFile,
  EmptyFile,
  RaggedRows,
  NonNumericCell,
  MalformedRecord,
  DuplicatePath,
  TargetTooLarge,
  ZeroTarget,
  ColumnMismatch,
  NameCollision,
  EmptyMatrix,
  NonFiniteInput,
  IoError,
  ShapeMismatch,
  ImageTooSmall,
  InvalidLabel,
  InvalidArgument,
  NonFiniteGradient,
  InsufficientClassSamples,
  BatchTooSmall,
  BadMagic,
  ShapeManifestMismatch,
  VersionUnsupported,
  ReferenceNotFound,
  AmbiguousReference,
  EmptyBank,
  NoQueries,
  KeepOutOfRange,
  DegenerateData,
  InvalidProtocol,
  InvalidConfig,
};

std::string_view error_name(ErrorCode code);

/// Domain error. what() is "<ErrorName>: <detail>" so callers can surface the
/// name without knowing the code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sldml

#endif  // SLDML_ERROR_HPP_
