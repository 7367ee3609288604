//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/geoloss.h"

#include <fmt/format.h>

#include "hamforge/diff/ops.h"
#include "hamforge/diff/svd.h"
#include "hamforge/error.h"

namespace hamforge {
using diff::Tape;
using diff::Var;

Matrix normalized_simple_adjacency(const chem::MoleculeGraph &mol) {
  const auto n = static_cast<Eigen::Index>(mol.num_atoms());
  Matrix a = Matrix::Identity(n, n);
  for (const auto &b: mol.bonds()) {
    a(static_cast<Eigen::Index>(b.begin), static_cast<Eigen::Index>(b.end)) = 1.0;
    a(static_cast<Eigen::Index>(b.end), static_cast<Eigen::Index>(b.begin)) = 1.0;
  }
  const Vector dinv = a.rowwise().sum().array().rsqrt();
  return dinv.asDiagonal() * a * dinv.asDiagonal();
}

Matrix matrix_power(const Matrix &a, int k) {
  if (k < 1)
    throw Error(ErrorCode::kConfigError, fmt::format("adjacency power {} must be >= 1", k));
  Matrix out = a;
  for (int i = 1; i < k; ++i)
    out = out * a;
  return out;
}

ConformerRef ConformerRef::from(const chem::MoleculeGraph &mol, int k, double mass_scale) {
  if (!mol.reference_conformation())
    throw Error(ErrorCode::kNoConformations, "molecule has no reference conformation");
  return { *mol.reference_conformation(), mol.masses(mass_scale),
           matrix_power(normalized_simple_adjacency(mol), k), k };
}

namespace loss {
  using namespace diff;

  namespace {
    void check_pair(Var q_hat, const Matrix &q_ref) {
      if (q_hat.rows() != q_ref.rows() || q_hat.cols() != 3 || q_ref.cols() != 3)
        throw Error(ErrorCode::kShapeMismatch,
                    fmt::format("conformer pair {}x{} vs {}x{}", q_hat.rows(), q_hat.cols(),
                                q_ref.rows(), q_ref.cols()));
    }

    Matrix weights(const Vector &masses, Eigen::Index n, bool weighted) {
      if (masses.size() != n)
        throw Error(ErrorCode::kShapeMismatch, "mass vector length differs from atom count");
      if (!weighted)
        return Matrix::Constant(n, 1, 1.0 / static_cast<double>(n));
      return Matrix(masses / masses.sum());
    }

    // Squared pairwise distances of centered rows.
    Var squared_distances(Var x) {
      Var c = sub(x, mean(x, 0));
      Var sq = sum(square(c), 1);
      Var d = sub(add(sq, transpose(sq)), scale(matmul(c, transpose(c)), 2.0));
      return scale(add(d, transpose(d)), 0.5);
    }

    // Same arithmetic as the tape version, so identical inputs cancel exactly.
    Matrix squared_distances(const Matrix &x) {
      Tape t;
      return squared_distances(t.constant(x)).value();
    }
  }  // namespace

  Var kabsch_align(Var q_hat, const Matrix &q_ref, const Vector &masses, bool weighted) {
    check_pair(q_hat, q_ref);
    Tape &t = *q_hat.tape();
    const Eigen::Index n = q_ref.rows();
    const Matrix w = weights(masses, n, weighted);
    const Matrix ref_centroid = w.transpose() * q_ref;
    const Matrix y = q_ref.rowwise() - ref_centroid.row(0);

    Var wv = t.constant(w);
    Var x = sub(q_hat, matmul(transpose(wv), q_hat));
    Var cov = matmul(transpose(mul(x, wv)), t.constant(y));

    Svd3Vars f;
    try {
      f = svd3(cov);
    } catch (const Error &e) {
      if (e.code() != ErrorCode::kNoConvergence)
        throw;
      throw Error(ErrorCode::kDegenerateGeometry, e.what());
    }
    // R = V diag(1, 1, d) U^T, d fixes a reflection
    const double d = (f.v.value() * f.u.value().transpose()).determinant() < 0 ? -1.0 : 1.0;
    Matrix fix = Matrix::Identity(3, 3);
    fix(2, 2) = d;
    Var r = matmul(matmul(f.v, t.constant(fix)), transpose(f.u));
    // rows: x_i^T R^T
    return add(matmul(x, transpose(r)), t.constant(ref_centroid));
  }

  Var k_rmsd(Var q_hat, const Matrix &q_ref, const Vector &masses, bool weighted) {
    Var aligned = kabsch_align(q_hat, q_ref, masses, weighted);
    Tape &t = *q_hat.tape();
    Var dev = sum(square(sub(aligned, t.constant(q_ref))), 1);
    const Matrix w = masses / masses.sum();
    return sqrt(sum(mul(dev, t.constant(w))));
  }

  Var dist_loss(Var q_hat, const Matrix &q_ref) {
    check_pair(q_hat, q_ref);
    Tape &t = *q_hat.tape();
    const auto n = static_cast<double>(q_ref.rows());
    Var diff = sub(squared_distances(q_hat), t.constant(squared_distances(q_ref)));
    return sqrt(scale(sum(square(diff)), 1.0 / (n * n)));
  }

  Var adj_k_loss(Var q_hat, const Matrix &q_ref, const Matrix &adj_pow) {
    check_pair(q_hat, q_ref);
    if (adj_pow.rows() != q_ref.rows() || adj_pow.cols() != q_ref.rows())
      throw Error(ErrorCode::kShapeMismatch, "adjacency power does not match atom count");
    Tape &t = *q_hat.tape();
    const auto n = static_cast<double>(q_ref.rows());
    Var diff = sub(squared_distances(q_hat), t.constant(squared_distances(q_ref)));
    return sqrt(scale(sum(mul(square(diff), t.constant(adj_pow))), 1.0 / n));
  }

  Var combined_loss(Var q_hat, const ConformerRef &ref, double lambda, bool weighted_kabsch) {
    if (lambda < 0)
      throw Error(ErrorCode::kConfigError, "lambda must be non-negative");
    Var k = k_rmsd(q_hat, ref.q_ref, ref.masses, weighted_kabsch);
    if (lambda == 0.0)
      return k;
    return add(k, scale(adj_k_loss(q_hat, ref.q_ref, ref.adj_pow), lambda));
  }
}  // namespace loss

Matrix kabsch_align(const Matrix &q_hat, const Matrix &q_ref, const Vector &masses,
                    bool weighted) {
  Tape t;
  return loss::kabsch_align(t.constant(q_hat), q_ref, masses, weighted).value();
}

double k_rmsd(const Matrix &q_hat, const Matrix &q_ref, const Vector &masses, bool weighted) {
  Tape t;
  return loss::k_rmsd(t.constant(q_hat), q_ref, masses, weighted).item();
}

double dist_loss(const Matrix &q_hat, const Matrix &q_ref) {
  Tape t;
  return loss::dist_loss(t.constant(q_hat), q_ref).item();
}

double adj_k_loss(const Matrix &q_hat, const Matrix &q_ref, const Matrix &adj_pow) {
  Tape t;
  return loss::adj_k_loss(t.constant(q_hat), q_ref, adj_pow).item();
}

LossReport evaluate_losses(const Matrix &q_hat, const ConformerRef &ref, double lambda) {
  LossReport r;
  r.lambda = lambda;
  r.k_rmsd = k_rmsd(q_hat, ref.q_ref, ref.masses);
  r.dist = dist_loss(q_hat, ref.q_ref);
  r.adj = adj_k_loss(q_hat, ref.q_ref, ref.adj_pow);
  r.combined = r.k_rmsd + lambda * r.adj;
  return r;
}

}  // namespace hamforge
