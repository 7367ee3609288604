//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_GEOLOSS_H_
#define HAMFORGE_GEOLOSS_H_

#include "hamforge/chem/molecule.h"
#include "hamforge/diff/tape.h"
#include "hamforge/matrix.h"

namespace hamforge {

// D^-1/2 (A + I) D^-1/2 over bond existence, bond types ignored.
Matrix normalized_simple_adjacency(const chem::MoleculeGraph &mol);
Matrix matrix_power(const Matrix &a, int k);

// Everything a loss needs besides the prediction.
struct ConformerRef {
  Matrix q_ref;     // n x 3
  Vector masses;    // n, positive
  Matrix adj_pow;   // (A~)^k, n x n
  int k = 3;

  static ConformerRef from(const chem::MoleculeGraph &mol, int k = 3, double mass_scale = 50.0);
};

struct LossReport {
  double k_rmsd = 0.0;
  double dist = 0.0;  // in the units of the coordinates
  double adj = 0.0;
  double combined = 0.0;
  double lambda = 1.0;
};

namespace loss {
  // Rotates (properly) and translates q_hat onto q_ref. With `weighted`, the
  // centroids and covariance are mass-weighted, otherwise uniform. Throws
  // kDegenerateGeometry when the SVD fails.
  diff::Var kabsch_align(diff::Var q_hat, const Matrix &q_ref, const Vector &masses,
                         bool weighted = true);
  diff::Var k_rmsd(diff::Var q_hat, const Matrix &q_ref, const Vector &masses,
                   bool weighted = true);
  diff::Var dist_loss(diff::Var q_hat, const Matrix &q_ref);
  diff::Var adj_k_loss(diff::Var q_hat, const Matrix &q_ref, const Matrix &adj_pow);
  // k_rmsd + lambda * adj_k
  diff::Var combined_loss(diff::Var q_hat, const ConformerRef &ref, double lambda,
                          bool weighted_kabsch = true);
}  // namespace loss

// Plain-value versions.
Matrix kabsch_align(const Matrix &q_hat, const Matrix &q_ref, const Vector &masses,
                    bool weighted = true);
double k_rmsd(const Matrix &q_hat, const Matrix &q_ref, const Vector &masses,
              bool weighted = true);
double dist_loss(const Matrix &q_hat, const Matrix &q_ref);
double adj_k_loss(const Matrix &q_hat, const Matrix &q_ref, const Matrix &adj_pow);
LossReport evaluate_losses(const Matrix &q_hat, const ConformerRef &ref, double lambda);

}  // namespace hamforge

#endif  // HAMFORGE_GEOLOSS_H_
