//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/encoder.h"

#include <fmt/format.h>

#include "hamforge/diff/nn.h"
#include "hamforge/diff/ops.h"
#include "hamforge/error.h"

namespace hamforge {
using namespace diff;
using chem::MoleculeGraph;

namespace {
  constexpr double kMinSeparation = 1e-8;

  Var sequence_head(ParamBinding &p, const std::string &name, Var x, const MoleculeGraph &mol,
                    const EncoderConfig &config) {
    if (config.use_lstm)
      return lstm_sequence(p, "enc.lstm_" + name, x, mol.smiles_order());
    return linear(x, p["enc.lin_" + name + ".W"], p["enc.lin_" + name + ".b"]);
  }
}  // namespace

void add_encoder_spec(std::vector<ParamSpec> &spec, const EncoderConfig &config) {
  const Eigen::Index tuple = 2 * MoleculeGraph::kAtomFeatureWidth + MoleculeGraph::kBondFeatureWidth;
  add_mlp_spec(spec, "enc.bond", { tuple, config.bond_hidden, 1 });
  for (const char *stack: { "q", "p" }) {
    Eigen::Index in = MoleculeGraph::kAtomFeatureWidth;
    for (int l = 0; l < config.gcn_layers; ++l) {
      spec.push_back({ fmt::format("enc.gcn_{}.W{}", stack, l), in, config.gcn_width });
      in = config.gcn_width;
    }
    if (config.use_lstm) {
      add_lstm_spec(spec, fmt::format("enc.lstm_{}", stack), config.concat_width(), config.d_f);
    } else {
      spec.push_back({ fmt::format("enc.lin_{}.W", stack), config.concat_width(), config.d_f });
      spec.push_back({ fmt::format("enc.lin_{}.b", stack), 1, config.d_f, ParamKind::kBias });
    }
  }
}

Adjacency bond_strength(ParamBinding &p, const MoleculeGraph &mol) {
  Tape &t = p.tape();
  const auto n = static_cast<Eigen::Index>(mol.num_atoms());
  const auto nb = static_cast<Eigen::Index>(mol.num_bonds());
  const Matrix &v = mol.atom_features();
  const Matrix &e = mol.bond_features();
  const Eigen::Index av = v.cols(), bw = e.cols();

  // both orientations of every atom-bond-atom tuple, then one-hot incidence
  Matrix tuples(2 * nb, 2 * av + bw);
  Matrix begin = Matrix::Zero(nb, n), end = Matrix::Zero(nb, n);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto &bond = mol.bond(static_cast<std::size_t>(b));
    const auto i = static_cast<Eigen::Index>(bond.begin), j = static_cast<Eigen::Index>(bond.end);
    tuples.row(b) << v.row(i), e.row(b), v.row(j);
    tuples.row(nb + b) << v.row(j), e.row(b), v.row(i);
    begin(b, i) = 1.0;
    end(b, j) = 1.0;
  }

  Var s = sigmoid(mlp(p, "enc.bond", t.constant(std::move(tuples)), 2));
  Var strength = scale(add(slice_rows(s, 0, nb), slice_rows(s, nb, nb)), 0.5);
  Var bi = t.constant(std::move(begin)), bj = t.constant(std::move(end));
  Var a = add(matmul(transpose(bi), mul(strength, bj)), matmul(transpose(bj), mul(strength, bi)));

  // self loops weighted by the mean bond strength keep isolated atoms finite
  Var self = nb > 0 ? mean(strength) : t.constant(Matrix::Ones(1, 1));
  Var looped = add(a, mul(t.constant(Matrix::Identity(n, n)), self));
  Var dinv = pow(sum(looped, 1), -0.5);
  Var a_hat = mul(looped, matmul(dinv, transpose(dinv)));
  return { a, a_hat };
}

std::vector<Var> dense_gcn(ParamBinding &p, const std::string &prefix, Var x, Var a_hat,
                           int layers) {
  if (layers < 1)
    throw Error(ErrorCode::kShapeMismatch, "dense_gcn needs at least one layer");
  if (a_hat.rows() != x.rows() || a_hat.cols() != x.rows())
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("adjacency {}x{} for {} atoms", a_hat.rows(), a_hat.cols(), x.rows()));
  std::vector<Var> out { x };
  for (int l = 0; l < layers; ++l)
    out.push_back(relu(matmul(a_hat, matmul(out.back(), p[fmt::format("{}.W{}", prefix, l)]))));
  return out;
}

EncoderOutput encode_initial(ParamBinding &p, const MoleculeGraph &mol,
                             const EncoderConfig &config) {
  Tape &t = p.tape();
  Adjacency adj = bond_strength(p, mol);
  Var x = t.constant(mol.atom_features());

  EncoderOutput out;
  for (const char *stack: { "q", "p" }) {
    auto layers = dense_gcn(p, fmt::format("enc.gcn_{}", stack), x, adj.a_hat, config.gcn_layers);
    Var tilde = concat(std::span<const Var>(layers), 1);
    Var init = sequence_head(p, stack, tilde, mol, config);
    (stack[0] == 'q' ? out.q0 : out.p0) = init;
  }

  if (config.use_lstm) {
    const Matrix &q = out.q0.value();
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      for (Eigen::Index j = i + 1; j < q.rows(); ++j)
        if ((q.row(i) - q.row(j)).norm() <= kMinSeparation)
          throw Error(ErrorCode::kDegenerateOutput,
                      fmt::format("initial positions of atoms {} and {} coincide", i, j),
                      static_cast<std::int64_t>(i));
  }
  return out;
}

}  // namespace hamforge
