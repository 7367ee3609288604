//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_ORACLE_H_
#define HAMFORGE_ORACLE_H_

#include <cstdint>
#include <string>
#include <vector>

namespace hamforge {

// One finite-difference comparison over random instances of a single
// differentiable piece of the model.
struct OracleCheck {
  std::string group;  // core | block | energy | force | dynamics | loss | pipeline
  std::string name;
  double tolerance = 1e-4;
  double max_rel_error = 0.0;
  std::string worst;  // parameter and element of the worst probe

  bool passed() const { return max_rel_error <= tolerance; }
};

// Core ops are held to 1e-5; everything composite to 1e-4.
inline constexpr double kCoreOpTolerance = 1e-5;
inline constexpr double kCompositeTolerance = 1e-4;

std::vector<OracleCheck> run_gradient_oracle(std::uint64_t seed = 0, int trials = 3);

}  // namespace hamforge

#endif  // HAMFORGE_ORACLE_H_
