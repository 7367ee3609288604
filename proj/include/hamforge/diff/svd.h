//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_SVD_H_
#define HAMFORGE_DIFF_SVD_H_

#include <cstdint>

#include "hamforge/diff/tape.h"
#include "hamforge/matrix.h"

namespace hamforge::diff {

// Singular-value gap below which the backward pass treats U and V as
// constants.
inline constexpr double kSvdGapFloor = 1e-6;

struct Svd3 {
  Matrix u;  // 3 x 3
  Matrix s;  // 1 x 3, descending, non-negative
  Matrix v;  // 3 x 3
};

// M = U diag(S) V^T. Throws kNoConvergence on non-finite input or output.
Svd3 svd3(const Matrix &m);

struct Svd3Vars {
  Var u, s, v;
};

// Differentiable version. Gradients flowing into U and V are dropped when two
// singular values are closer than kSvdGapFloor; the event is counted.
Svd3Vars svd3(Var m);

// Number of straight-through backward passes taken so far (process-wide).
std::uint64_t svd_straight_through_count();

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_SVD_H_
