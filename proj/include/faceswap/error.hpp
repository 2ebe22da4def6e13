#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faceswap {

enum class ErrorCode {
  kInvalidArgument,
  kParseMalformedHeader,
  kParseDimensionMismatch,
  kParseTruncated,
  kParseInvalidTriangle,
  kIo,
  kBehindCamera,
  kInsufficientCorrespondences,
  kDegenerateConfiguration,
  kNoVisibleLandmarks,
  kUndefinedRecall,
  kGalleryExhausted,
  kSingleClass,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kParseMalformedHeader: return "malformed-header";
    case ErrorCode::kParseDimensionMismatch: return "dimension-inconsistency";
    case ErrorCode::kParseTruncated: return "truncated-payload";
    case ErrorCode::kParseInvalidTriangle: return "invalid-triangle";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kInsufficientCorrespondences: return "insufficient-correspondences";
    case ErrorCode::kDegenerateConfiguration: return "degenerate-configuration";
    case ErrorCode::kNoVisibleLandmarks: return "no-visible-landmarks";
    case ErrorCode::kUndefinedRecall: return "undefined-recall";
    case ErrorCode::kGalleryExhausted: return "gallery-exhausted";
    case ErrorCode::kSingleClass: return "single-class";
  }
  return "unknown";
}

/// Base exception for every failure raised by the library. The code lets
/// callers branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown when a 3D point lands at or behind the camera plane.
class BehindCameraError : public Error {
 public:
  explicit BehindCameraError(std::size_t index)
      : Error(ErrorCode::kBehindCamera,
              "point " + std::to_string(index) + " has nonpositive depth"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace faceswap
