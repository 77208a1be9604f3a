#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depthfuse {

enum class Errc {
  MalformedHeader,
  UnexpectedEof,
  NonFiniteValue,
  IoFailure,
  OutOfRange,
  ZeroDimension,
  AlreadyInverse,
  TooSmall,
  DimMismatch,
  ShapeMismatch,
  NoConvergence,
  BackwardBeforeForward,
  InvalidConfig,
  NonFiniteLoss,
  VersionMismatch,
  CorruptFile,
  EmptyValidSet,
  NonPositiveForLog,
  EmptyPairSet,
  ScaleCountMismatch,
  OutOfRangeInput,
};

std::string_view errc_name(Errc code);

// Numerical failures (solver divergence, exploding loss) are distinguished
// from data errors so that the CLI can map them to separate exit codes.
inline bool is_numerical(Errc code) {
  return code == Errc::NoConvergence || code == Errc::NonFiniteLoss;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace depthfuse
