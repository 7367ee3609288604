//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/fingerprint.h"

#include <fmt/format.h>

#include "hamforge/diff/nn.h"
#include "hamforge/diff/ops.h"
#include "hamforge/error.h"

namespace hamforge {
using namespace diff;
using chem::MoleculeGraph;

void add_fingerprint_spec(std::vector<ParamSpec> &spec, const FpConfig &config) {
  const Eigen::Index h = config.hidden, g = config.geo_width();
  add_mlp_spec(spec, "fp.atom", { MoleculeGraph::kAtomFeatureWidth, h, h });
  add_mlp_spec(spec, "fp.bond", { MoleculeGraph::kBondFeatureWidth, h, h });
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = fmt::format("fp.mp{}", l);
    spec.push_back({ pre + ".w_eps", h + g, 1 });
    spec.push_back({ pre + ".W_M", 2 * h + g, h });
    add_gru_spec(spec, pre + ".gru", h, h);
  }
  for (int m = 0; m < config.passes; ++m) {
    const std::string pre = fmt::format("fp.ro{}", m);
    spec.push_back({ pre + ".w_eta", 2 * h + g, 1 });
    spec.push_back({ pre + ".W_s", h + g, h });
    add_gru_spec(spec, pre + ".gru", h, h);
  }
  spec.push_back({ "fp.head.W", h, config.tasks });
  spec.push_back({ "fp.head.b", 1, config.tasks, ParamKind::kBias });
  if (config.conf == ConfSource::kReal) {
    add_mlp_spec(spec, "fp.lift_q", { 3, config.d_f, config.d_f });
    add_mlp_spec(spec, "fp.lift_p", { 3, config.d_f, config.d_f });
  }
}

EdgeList EdgeList::from(const MoleculeGraph &mol) {
  EdgeList e;
  e.has_neighbor = Matrix::Zero(static_cast<Eigen::Index>(mol.num_atoms()), 1);
  for (std::size_t b = 0; b < mol.num_bonds(); ++b) {
    const auto &bond = mol.bond(b);
    e.src.insert(e.src.end(), { bond.begin, bond.end });
    e.dst.insert(e.dst.end(), { bond.end, bond.begin });
    e.bond.insert(e.bond.end(), { b, b });
    e.has_neighbor(static_cast<Eigen::Index>(bond.begin), 0) = 1.0;
    e.has_neighbor(static_cast<Eigen::Index>(bond.end), 0) = 1.0;
  }
  return e;
}

AtomStates init_states(ParamBinding &p, const MoleculeGraph &mol) {
  Tape &t = p.tape();
  return { mlp(p, "fp.atom", t.constant(mol.atom_features()), 2),
           mlp(p, "fp.bond", t.constant(mol.bond_features()), 2) };
}

Var relative_geometry(Var qp, const EdgeList &edges) {
  return sub(gather_rows(qp, edges.src), gather_rows(qp, edges.dst));
}

Var mp_layer(ParamBinding &p, int layer, Var h, Var f, const EdgeList &edges, Var qp,
             const FpConfig &config) {
  if (edges.src.empty())
    return h;  // no neighbours anywhere: zero messages, nothing changes
  Tape &t = p.tape();
  const std::string pre = fmt::format("fp.mp{}", layer);
  const bool geo = config.conf != ConfSource::kNone;
  const auto n = h.rows();

  Var fe = gather_rows(f, edges.bond);
  Var hi = gather_rows(h, edges.src), hj = gather_rows(h, edges.dst);
  Var r = geo ? relative_geometry(qp, edges) : Var();

  Var energy = matmul(geo ? concat({ fe, r }, 1) : fe, p[pre + ".w_eps"]);
  if (config.leaky_attention)
    energy = leaky_relu(energy, 0.2);
  Var alpha = segment_softmax(energy, edges.src, static_cast<std::size_t>(n));

  Var cat = geo ? concat({ hi, r, hj }, 1) : concat({ hi, hj }, 1);
  Var msg = scatter_add_rows(mul(matmul(cat, p[pre + ".W_M"]), alpha), edges.src, n);
  Var updated = gru_cell(p, pre + ".gru", msg, h);
  // isolated atoms keep their state
  Var mask = t.constant(edges.has_neighbor);
  return add(h, mul(mask, sub(updated, h)));
}

Var readout(ParamBinding &p, Var h, Var qp, const FpConfig &config) {
  Tape &t = p.tape();
  const bool geo = config.conf != ConfSource::kNone;
  const auto n = h.rows();
  Var ones = t.constant(Matrix::Ones(n, 1));
  Var atom_part = geo ? concat({ qp, h }, 1) : h;

  Var hg = mean(h, 0);
  for (int m = 0; m < config.passes; ++m) {
    const std::string pre = fmt::format("fp.ro{}", m);
    Var eta = matmul(concat({ matmul(ones, hg), atom_part }, 1), p[pre + ".w_eta"]);
    Var beta = softmax(eta, 0);
    Var s = matmul(transpose(beta), matmul(atom_part, p[pre + ".W_s"]));
    hg = gru_cell(p, pre + ".gru", s, hg);
  }
  return hg;
}

Var head(ParamBinding &p, Var fp, const FpConfig &config) {
  Var w = p["fp.head.W"];
  if (w.cols() != config.tasks || w.rows() != fp.cols())
    throw Error(ErrorCode::kWidthMismatch,
                fmt::format("head is {}x{}, expected {}x{}", w.rows(), w.cols(), fp.cols(),
                            config.tasks));
  return linear(fp, w, p["fp.head.b"]);
}

Var predict(ParamBinding &p, Var fp, const FpConfig &config) {
  Var out = head(p, fp, config);
  return config.classification ? sigmoid(out) : out;
}

std::pair<Var, Var> lift_conformation(ParamBinding &p, const Matrix &coords) {
  Tape &t = p.tape();
  Var q = mlp(p, "fp.lift_q", t.constant(coords), 2);
  Var m = mlp(p, "fp.lift_p", t.constant(Matrix::Zero(coords.rows(), 3)), 2);
  return { q, m };
}

Var fingerprint(ParamBinding &p, const MoleculeGraph &mol, Var q, Var p_mom,
                const FpConfig &config) {
  const EdgeList edges = EdgeList::from(mol);
  AtomStates s = init_states(p, mol);
  Var qp;
  if (config.conf != ConfSource::kNone) {
    if (q.rows() != s.h.rows() || q.cols() != config.d_f || p_mom.rows() != q.rows() ||
        p_mom.cols() != q.cols())
      throw Error(ErrorCode::kWidthMismatch,
                  fmt::format("fingerprint expects {}x{} positions and momenta", s.h.rows(),
                              config.d_f));
    qp = concat({ q, p_mom }, 1);
  }
  Var h = s.h;
  for (int l = 0; l < config.layers; ++l)
    h = mp_layer(p, l, h, s.f, edges, qp, config);
  return readout(p, h, qp, config);
}

}  // namespace hamforge
