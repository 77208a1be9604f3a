#include "depthfuse/error.hpp"

namespace depthfuse {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnexpectedEof: return "UnexpectedEof";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::IoFailure: return "IoFailure";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::AlreadyInverse: return "AlreadyInverse";
    case Errc::TooSmall: return "TooSmall";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::BackwardBeforeForward: return "BackwardBeforeForward";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::EmptyValidSet: return "EmptyValidSet";
    case Errc::NonPositiveForLog: return "NonPositiveForLog";
    case Errc::EmptyPairSet: return "EmptyPairSet";
    case Errc::ScaleCountMismatch: return "ScaleCountMismatch";
    case Errc::OutOfRangeInput: return "OutOfRangeInput";
  }
  return "Unknown";
}

}  // namespace depthfuse
