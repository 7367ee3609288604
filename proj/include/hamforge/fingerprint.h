//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_FINGERPRINT_H_
#define HAMFORGE_FINGERPRINT_H_

#include <string>
#include <vector>

#include "hamforge/chem/molecule.h"
#include "hamforge/diff/params.h"

namespace hamforge {

// Where the per-atom (q, p) fed to the fingerprint come from.
enum class ConfSource {
  kEngine,  // final engine state
  kNone,    // "w/o conf.": q, p removed from every concatenation
  kReal,    // reference coordinates lifted by an MLP
};

struct FpConfig {
  Eigen::Index hidden = 200;
  int layers = 2;   // L message-passing layers
  int passes = 2;   // M readout passes
  Eigen::Index d_f = 32;
  ConfSource conf = ConfSource::kEngine;
  bool leaky_attention = false;  // leaky-relu(0.2) on the attention energies
  Eigen::Index tasks = 1;
  bool classification = false;

  Eigen::Index geo_width() const { return conf == ConfSource::kNone ? 0 : 2 * d_f; }
};

// fp.atom.*, fp.bond.* input MLPs, fp.mp{l}.{w_eps, W_M, gru.*}, fp.ro{m}.{w_eta,
// W_s, gru.*}, fp.head.{W, b}, plus fp.lift_q.*, fp.lift_p.* for real
// conformations.
void add_fingerprint_spec(std::vector<diff::ParamSpec> &spec, const FpConfig &config);

// Directed edges, two per bond: messages flow from dst into src.
struct EdgeList {
  std::vector<std::size_t> src, dst, bond;
  Matrix has_neighbor;  // n x 1 indicator

  static EdgeList from(const chem::MoleculeGraph &mol);
};

struct AtomStates {
  diff::Var h;  // n x hidden
  diff::Var f;  // bonds x hidden
};
AtomStates init_states(diff::ParamBinding &p, const chem::MoleculeGraph &mol);

// Rows r_e = (q ⊕ p)[src] - (q ⊕ p)[dst]; qp is n x 2 d_f.
diff::Var relative_geometry(diff::Var qp, const EdgeList &edges);

// One attentive message-passing layer. `qp` is ignored without geometry.
diff::Var mp_layer(diff::ParamBinding &p, int layer, diff::Var h, diff::Var f,
                   const EdgeList &edges, diff::Var qp, const FpConfig &config);

// Meta-node readout, 1 x hidden.
diff::Var readout(diff::ParamBinding &p, diff::Var h, diff::Var qp, const FpConfig &config);

// 1 x tasks. Raw values for regression, probabilities for classification.
diff::Var predict(diff::ParamBinding &p, diff::Var fp, const FpConfig &config);
// Pre-sigmoid head output.
diff::Var head(diff::ParamBinding &p, diff::Var fp, const FpConfig &config);

// (q, p) for kReal: an MLP of the coordinates and of a zero vector.
std::pair<diff::Var, diff::Var> lift_conformation(diff::ParamBinding &p, const Matrix &coords);

// Full generator. q and p are n x d_f (ignored for kNone).
diff::Var fingerprint(diff::ParamBinding &p, const chem::MoleculeGraph &mol, diff::Var q,
                      diff::Var p_mom, const FpConfig &config);

}  // namespace hamforge

#endif  // HAMFORGE_FINGERPRINT_H_
