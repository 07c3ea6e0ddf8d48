#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvgeom {

/// Failure kinds raised by the toolkit. Each kind belongs to either the
/// input class (bad files, bad arguments) or the numeric class (degenerate
/// geometry, non-finite values); the CLI maps them to exit codes 2 and 3.
enum class ErrorCode {
  // input / parse
  MissingFile,
  IoFailure,
  BadMagic,
  MalformedHeader,
  UnsupportedDtype,
  HeaderShapeMismatch,
  MalformedLine,
  NonMonotonicTimestamps,
  ZeroQuaternion,
  NonUnitQuaternion,
  DecodeFailure,
  UnsupportedColorType,
  InvalidArgument,
  EmptyImage,
  ZeroBins,
  BinCountMismatch,
  EmptySet,
  TokenCountMismatch,
  LengthMismatch,
  ShapeMismatch,
  WrongChannelCount,
  LayerSetMismatch,
  ChannelMismatch,
  DescriptorDimMismatch,
  IndexOutOfRange,
  TooFewPixels,
  ZeroDimension,
  TooFewPairs,
  // numeric / degenerate
  DegenerateGeometry,
  InvalidRotation,
  EmptyCloud,
  ZeroContentStd,
  ZeroDescriptor,
  DegenerateToken,
  NonFiniteInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::HeaderShapeMismatch: return "HeaderShapeMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::ZeroQuaternion: return "ZeroQuaternion";
    case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorCode::DecodeFailure: return "DecodeFailure";
    case ErrorCode::UnsupportedColorType: return "UnsupportedColorType";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::ZeroBins: return "ZeroBins";
    case ErrorCode::BinCountMismatch: return "BinCountMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::TokenCountMismatch: return "TokenCountMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::WrongChannelCount: return "WrongChannelCount";
    case ErrorCode::LayerSetMismatch: return "LayerSetMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::DescriptorDimMismatch: return "DescriptorDimMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::ZeroContentStd: return "ZeroContentStd";
    case ErrorCode::ZeroDescriptor: return "ZeroDescriptor";
    case ErrorCode::DegenerateToken: return "DegenerateToken";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
  }
  return "Unknown";
}

constexpr bool is_numeric_error(ErrorCode code) {
  return code >= ErrorCode::DegenerateGeometry;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvgeom
