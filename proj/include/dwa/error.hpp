#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dwa {

enum class ErrorCode {
  ShapeMismatch,
  NonFiniteValue,
  ChannelMismatch,
  ShiftTooLarge,
  NonScalarLoss,
  OddSpatialSize,
  ChannelNotDivisibleBy4,
  NotDivisible,
  InvalidConfig,
  ShapeIncompatible,
  BadTransformId,
  ImageTooSmall,
  EmptyDataset,
  DegenerateOutput,
  TooSmall,
  DecodeError,
  IoError,
  VersionMismatch,
  CorruptPayload,
  BadSize,
  HashMismatch,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::OddSpatialSize: return "OddSpatialSize";
    case ErrorCode::ChannelNotDivisibleBy4: return "ChannelNotDivisibleBy4";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeIncompatible: return "ShapeIncompatible";
    case ErrorCode::BadTransformId: return "BadTransformId";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DegenerateOutput: return "DegenerateOutput";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptPayload: return "CorruptPayload";
    case ErrorCode::BadSize: return "BadSize";
    case ErrorCode::HashMismatch: return "HashMismatch";
  }
  return "Unknown";
}

// All library failures surface as dwa::Error; code() identifies the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace dwa
