//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_GRADCHECK_H_
#define HAMFORGE_DIFF_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hamforge/diff/params.h"

namespace hamforge::diff {

// Builds a scalar (1 x 1) on the binding's tape from the bound parameters.
// Must be a pure function of the parameter values.
using Objective = std::function<Var(ParamBinding &)>;

struct GradCheckOptions {
  double eps = 1e-6;  // must lie in [1e-7, 1e-4]
  // 0 probes every element; otherwise this many elements per tensor, drawn
  // with `seed`.
  std::size_t max_probes_per_tensor = 0;
  std::uint64_t seed = 0;
  // Restrict to these parameter names (all trainable ones when empty).
  std::vector<std::string> only;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t probes = 0;
};

// Relative error per element is |a - b| / max(1e-8, |a| + |b|) between the
// reverse-mode gradient a and the central difference b. Throws
// kNonFiniteGradient if either is not finite.
GradCheckResult grad_check(const Objective &f, const ParamSet &theta,
                           const GradCheckOptions &options);
double grad_check(const Objective &f, const ParamSet &theta, double eps);

// Value and reverse-mode gradient of `f` at `theta`.
double evaluate(const Objective &f, const ParamSet &theta, Grads *grads = nullptr);

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_GRADCHECK_H_
