#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajservo {

enum class ErrorCode {
  NonPositiveDepth,
  NonPositiveDisparity,
  EmptyFeatureSet,
  InvalidSceneConfig,
  UnknownTemplate,
  InvalidParams,
  OutOfSegmentWindow,
  FeatureStarvation,
  DegenerateJacobian,
  ConfigError,
  EmptyLog,
  InsufficientSamples,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonPositiveDisparity: return "NonPositiveDisparity";
    case ErrorCode::EmptyFeatureSet: return "EmptyFeatureSet";
    case ErrorCode::InvalidSceneConfig: return "InvalidSceneConfig";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::OutOfSegmentWindow: return "OutOfSegmentWindow";
    case ErrorCode::FeatureStarvation: return "FeatureStarvation";
    case ErrorCode::DegenerateJacobian: return "DegenerateJacobian";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code. Every failure raised by the
/// library is one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace trajservo
