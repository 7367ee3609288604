//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/error.h"

namespace hamforge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::kUnsupportedFeature:
    return "UnsupportedFeature";
  case ErrorCode::kUnbalancedRingBond:
    return "UnbalancedRingBond";
  case ErrorCode::kUnknownElement:
    return "UnknownElement";
  case ErrorCode::kSyntaxError:
    return "SyntaxError";
  case ErrorCode::kIoError:
    return "IoError";
  case ErrorCode::kHeaderMismatch:
    return "HeaderMismatch";
  case ErrorCode::kCountMismatch:
    return "CountMismatch";
  case ErrorCode::kMalformedLine:
    return "MalformedLine";
  case ErrorCode::kUnsupportedVersion:
    return "UnsupportedVersion";
  case ErrorCode::kTruncatedRecord:
    return "TruncatedRecord";
  case ErrorCode::kShapeMismatch:
    return "ShapeMismatch";
  case ErrorCode::kNoConvergence:
    return "NoConvergence";
  case ErrorCode::kNonFiniteGradient:
    return "NonFiniteGradient";
  case ErrorCode::kBadCheckpoint:
    return "BadCheckpoint";
  case ErrorCode::kDegenerateOutput:
    return "DegenerateOutput";
  case ErrorCode::kNonFinite:
    return "NonFinite";
  case ErrorCode::kDegenerateGeometry:
    return "DegenerateGeometry";
  case ErrorCode::kWidthMismatch:
    return "WidthMismatch";
  case ErrorCode::kTooSmall:
    return "TooSmall";
  case ErrorCode::kZeroVariance:
    return "ZeroVariance";
  case ErrorCode::kNoConformations:
    return "NoConformations";
  case ErrorCode::kCheckpointMissing:
    return "CheckpointMissing";
  case ErrorCode::kUndefinedAuc:
    return "UndefinedAUC";
  case ErrorCode::kUnknownVariant:
    return "UnknownVariant";
  case ErrorCode::kConfigError:
    return "ConfigError";
  }
  return "Unknown";
}

}  // namespace hamforge
