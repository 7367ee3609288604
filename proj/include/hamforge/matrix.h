//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_MATRIX_H_
#define HAMFORGE_MATRIX_H_

#include <Eigen/Dense>

namespace hamforge {

// Dense row-major storage used for every tensor in the library. Vectors are
// 1 x n rows unless stated otherwise.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace hamforge

#endif  // HAMFORGE_MATRIX_H_
