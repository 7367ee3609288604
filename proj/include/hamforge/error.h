//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_ERROR_H_
#define HAMFORGE_ERROR_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hamforge {

enum class ErrorCode : std::uint8_t {
  // chemgraph
  kUnsupportedFeature,
  kUnbalancedRingBond,
  kUnknownElement,
  kSyntaxError,
  kIoError,
  kHeaderMismatch,
  kCountMismatch,
  kMalformedLine,
  kUnsupportedVersion,
  kTruncatedRecord,
  // diffmath
  kShapeMismatch,
  kNoConvergence,
  kNonFiniteGradient,
  kBadCheckpoint,
  // encoder / engine / geoloss / fingerprint
  kDegenerateOutput,
  kNonFinite,
  kDegenerateGeometry,
  kWidthMismatch,
  // trainer / cli
  kTooSmall,
  kZeroVariance,
  kNoConformations,
  kCheckpointMissing,
  kUndefinedAuc,
  kUnknownVariant,
  kConfigError,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library. `detail` carries a code-specific
// integer: byte offset for syntax errors, step index for NonFinite, row or
// molecule index for data errors; -1 when unused.
class Error: public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what, std::int64_t detail = -1)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code), detail_(detail) { }

  ErrorCode code() const noexcept { return code_; }
  std::int64_t detail() const noexcept { return detail_; }

private:
  ErrorCode code_;
  std::int64_t detail_;
};

}  // namespace hamforge

#endif  // HAMFORGE_ERROR_H_
