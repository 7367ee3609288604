//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hamforge/error.h"

namespace hamforge::diff {

double evaluate(const Objective &f, const ParamSet &theta, Grads *grads) {
  Tape tape;
  ParamBinding bind(tape, theta);
  Var out = f(bind);
  if (out.rows() != 1 || out.cols() != 1)
    throw Error(ErrorCode::kShapeMismatch, "objective must be a scalar");
  if (grads != nullptr) {
    if (tape.requires_grad(out))
      tape.backward(out);
    *grads = bind.grads();
  }
  return out.item();
}

GradCheckResult grad_check(const Objective &f, const ParamSet &theta,
                           const GradCheckOptions &options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-4))
    throw Error(ErrorCode::kConfigError,
                fmt::format("grad_check eps {} outside [1e-7, 1e-4]", options.eps));

  Grads analytic;
  evaluate(f, theta, &analytic);

  ParamSet probe = theta;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!theta.trainable(i))
      continue;
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), theta.name(i)) == options.only.end())
      continue;

    const Eigen::Index n = theta.value(i).size();
    std::vector<Eigen::Index> elems(static_cast<std::size_t>(n));
    std::iota(elems.begin(), elems.end(), Eigen::Index { 0 });
    if (options.max_probes_per_tensor > 0 && elems.size() > options.max_probes_per_tensor) {
      std::shuffle(elems.begin(), elems.end(), rng);
      elems.resize(options.max_probes_per_tensor);
      std::sort(elems.begin(), elems.end());
    }

    for (Eigen::Index k: elems) {
      double &x = probe.mutable_value(i).data()[k];
      const double x0 = x;
      x = x0 + options.eps;
      const double up = evaluate(f, probe);
      x = x0 - options.eps;
      const double down = evaluate(f, probe);
      x = x0;

      const double b = (up - down) / (2.0 * options.eps);
      const double a = analytic.g[i].size() == 0 ? 0.0 : analytic.g[i].data()[k];
      if (!std::isfinite(a) || !std::isfinite(b))
        throw Error(ErrorCode::kNonFiniteGradient,
                    fmt::format("{}[{}]: analytic {} numeric {}", theta.name(i), k, a, b),
                    static_cast<std::int64_t>(i));
      // Round-off in up - down limits what the central difference can
      // resolve; only disagreement beyond that counts. A deep objective
      // (rollout + message passing) carries tens of ulps of forward error.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(up) + std::abs(down)) / (2.0 * options.eps);
      const double err = std::max(0.0, std::abs(a - b) - noise) /
                         std::max(1e-8, std::abs(a) + std::abs(b));
      ++result.probes;
      if (result.worst_index < 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = theta.name(i);
        result.worst_index = k;
        result.analytic = a;
        result.numeric = b;
      }
    }
  }
  return result;
}

double grad_check(const Objective &f, const ParamSet &theta, double eps) {
  GradCheckOptions options;
  options.eps = eps;
  return grad_check(f, theta, options).max_rel_error;
}

}  // namespace hamforge::diff
