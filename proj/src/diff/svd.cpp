//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/diff/svd.h"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <Eigen/SVD>

#include "hamforge/diff/ops.h"
#include "hamforge/error.h"

namespace hamforge::diff {
namespace {
  std::atomic<std::uint64_t> straight_through { 0 };

  bool all_finite(const Matrix &m) { return m.allFinite(); }
}  // namespace

Svd3 svd3(const Matrix &m) {
  if (m.rows() != 3 || m.cols() != 3)
    throw Error(ErrorCode::kShapeMismatch, "svd3 expects a 3x3 matrix");
  if (!all_finite(m))
    throw Error(ErrorCode::kNoConvergence, "svd3 input is not finite");

  Eigen::Matrix3d a = m;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Svd3 out { svd.matrixU(), Matrix(svd.singularValues().transpose()), svd.matrixV() };
  if (!all_finite(out.u) || !all_finite(out.s) || !all_finite(out.v))
    throw Error(ErrorCode::kNoConvergence, "svd3 did not converge");
  return out;
}

Svd3Vars svd3(Var m) {
  Svd3 f = svd3(m.value());
  Matrix packed(3, 7);
  packed << f.u, f.s.transpose(), f.v;

  Tape &t = *m.tape();
  Var node = t.record(packed, { m }, [m, f](Tape &tp, const Matrix &g) {
    const Matrix gu = g.leftCols(3), gv = g.rightCols(3);
    const Eigen::Vector3d gs = g.col(3);
    const Eigen::Vector3d s = f.s.transpose();

    double gap = std::abs(s(0) - s(1));
    gap = std::min({ gap, std::abs(s(1) - s(2)), std::abs(s(0) - s(2)) });

    Eigen::Matrix3d inner = gs.asDiagonal();
    if (gap < kSvdGapFloor) {
      ++straight_through;
    } else {
      Eigen::Matrix3d fm = Eigen::Matrix3d::Zero();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (i != j)
            fm(i, j) = 1.0 / (s(j) * s(j) - s(i) * s(i));
      const Eigen::Matrix3d utgu = f.u.transpose() * gu;
      const Eigen::Matrix3d vtgv = f.v.transpose() * gv;
      const Eigen::Matrix3d j = fm.cwiseProduct(utgu - utgu.transpose());
      const Eigen::Matrix3d k = fm.cwiseProduct(vtgv - vtgv.transpose());
      inner += j * s.asDiagonal();
      inner += s.asDiagonal() * k;
    }
    tp.accumulate(m, Matrix(f.u * inner * f.v.transpose()));
  });

  Var s = transpose(slice_cols(node, 3, 1));
  return { slice_cols(node, 0, 3), s, slice_cols(node, 4, 3) };
}

std::uint64_t svd_straight_through_count() { return straight_through.load(); }

}  // namespace hamforge::diff
