//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DIFF_OPS_H_
#define HAMFORGE_DIFF_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "hamforge/diff/tape.h"

namespace hamforge::diff {

// Differentiable operations on 2-D values. Binary elementwise operations
// broadcast along any dimension of extent 1. All throw kShapeMismatch on
// incompatible operands.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

Var matmul(Var a, Var b);
Var transpose(Var a);

// axis 0 stacks rows (equal column counts), axis 1 joins columns.
Var concat(std::span<const Var> parts, int axis);
inline Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

Var sum(Var a);              // 1 x 1
Var sum(Var a, int axis);    // axis 0 -> 1 x cols, axis 1 -> rows x 1
Var mean(Var a);
Var mean(Var a, int axis);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var abs(Var a);  // derivative 0 at 0
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var pow(Var a, double exponent);

// Max-shifted softmax along `axis` (0: down each column, 1: along each row).
Var softmax(Var a, int axis);

// max(a, floor) elementwise; the gradient is zero wherever a <= floor.
Var clamp_min(Var a, double floor);

// out[k] = a[index[k]]
Var gather_rows(Var a, std::span<const std::size_t> index);
// out[index[k]] += a[k], out has `rows` rows
Var scatter_add_rows(Var a, std::span<const std::size_t> index, Eigen::Index rows);
// Softmax of a column of scores within groups: entries sharing segment[k]
// are normalized together.
Var segment_softmax(Var scores, std::span<const std::size_t> segment,
                    std::size_t num_segments);

}  // namespace hamforge::diff

#endif  // HAMFORGE_DIFF_OPS_H_
