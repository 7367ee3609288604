//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_ENCODER_H_
#define HAMFORGE_ENCODER_H_

#include <string>
#include <vector>

#include "hamforge/chem/molecule.h"
#include "hamforge/diff/params.h"

namespace hamforge {

struct EncoderConfig {
  Eigen::Index bond_hidden = 64;
  int gcn_layers = 3;
  Eigen::Index gcn_width = 64;
  Eigen::Index d_f = 32;
  // false: per-atom linear map of the GCN concat instead of the LSTM
  // (positions may then coincide).
  bool use_lstm = true;

  Eigen::Index concat_width() const {
    return chem::MoleculeGraph::kAtomFeatureWidth + gcn_layers * gcn_width;
  }
};

// Parameters: enc.bond.*, enc.gcn_q.W{l}, enc.gcn_p.W{l}, and enc.lstm_q.*,
// enc.lstm_p.* (or enc.lin_q.*, enc.lin_p.* without the LSTM).
void add_encoder_spec(std::vector<diff::ParamSpec> &spec, const EncoderConfig &config);

struct Adjacency {
  diff::Var a;      // n x n bond strengths, zero off bonds and on the diagonal
  diff::Var a_hat;  // D^-1/2 (A + c I) D^-1/2, c = mean bond strength
};

Adjacency bond_strength(diff::ParamBinding &p, const chem::MoleculeGraph &mol);

// Returns [f0 = x, f1, ..., fL] with f{l+1} = relu(a_hat f{l} W{l}).
std::vector<diff::Var> dense_gcn(diff::ParamBinding &p, const std::string &prefix, diff::Var x,
                                 diff::Var a_hat, int layers);

struct EncoderOutput {
  diff::Var q0;  // n x d_f
  diff::Var p0;  // n x d_f
};

// Throws kDegenerateOutput if two rows of q0 lie within 1e-8 of each other
// (LSTM variant only).
EncoderOutput encode_initial(diff::ParamBinding &p, const chem::MoleculeGraph &mol,
                             const EncoderConfig &config);

}  // namespace hamforge

#endif  // HAMFORGE_ENCODER_H_
