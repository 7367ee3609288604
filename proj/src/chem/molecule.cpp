//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/chem/molecule.h"

#include <algorithm>
#include <array>
#include <numeric>
#include <string_view>

#include "hamforge/chem/element.h"
#include "hamforge/error.h"

namespace hamforge::chem {
namespace {
  constexpr std::array<std::string_view, 15> kFeatureElements = {
    "B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "As", "Se", "Br", "Te", "I", "At",
  };

  bool is_multiple(BondOrder order) { return order != BondOrder::kSingle; }

  // Tarjan bridge search; a bond is a ring bond iff it is not a bridge.
  std::vector<bool> find_ring_bonds(std::size_t n, const std::vector<Bond> &bonds,
                                    const std::vector<std::vector<Neighbor>> &adj) {
    std::vector<bool> in_ring(bonds.size(), true);
    std::vector<int> disc(n, -1), low(n, 0);
    int timer = 0;

    struct Frame {
      std::size_t atom;
      std::size_t parent_bond;
      std::size_t next;
    };
    std::vector<Frame> stack;
    for (std::size_t root = 0; root < n; ++root) {
      if (disc[root] >= 0)
        continue;
      disc[root] = low[root] = timer++;
      stack.push_back({ root, bonds.size(), 0 });
      while (!stack.empty()) {
        Frame &f = stack.back();
        if (f.next < adj[f.atom].size()) {
          const Neighbor nb = adj[f.atom][f.next++];
          if (nb.bond == f.parent_bond)
            continue;
          if (disc[nb.atom] < 0) {
            disc[nb.atom] = low[nb.atom] = timer++;
            stack.push_back({ nb.atom, nb.bond, 0 });
          } else {
            low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
          }
          continue;
        }
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent])
            in_ring[done.parent_bond] = false;
        }
      }
    }
    return in_ring;
  }

  Hybridization guess_hybridization(const Atom &atom, int n_double, int n_triple) {
    if (atom.is_aromatic)
      return Hybridization::kSP2;
    if (n_triple > 0 || n_double > 1)
      return Hybridization::kSP;
    if (n_double == 1)
      return Hybridization::kSP2;
    const int coordination = atom.degree + atom.num_hydrogens;
    if (coordination == 0)
      return Hybridization::kOther;
    if (coordination >= 6)
      return Hybridization::kSP3D2;
    if (coordination == 5)
      return Hybridization::kSP3D;
    return Hybridization::kSP3;
  }
}  // namespace

MoleculeGraph::MoleculeGraph(std::vector<Atom> atoms, std::vector<Bond> bonds,
                             std::vector<std::size_t> smiles_order)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)),
      smiles_order_(std::move(smiles_order)) {
  const std::size_t n = atoms_.size();
  if (smiles_order_.empty()) {
    smiles_order_.resize(n);
    std::iota(smiles_order_.begin(), smiles_order_.end(), 0);
  }
  if (smiles_order_.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "smiles_order length differs from atom count");
  std::vector<bool> seen(n, false);
  for (std::size_t idx: smiles_order_) {
    if (idx >= n || seen[idx])
      throw Error(ErrorCode::kShapeMismatch, "smiles_order is not a permutation");
    seen[idx] = true;
  }

  adjacency_.assign(n, {});
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    const Bond &bond = bonds_[b];
    if (bond.begin >= n || bond.end >= n)
      throw Error(ErrorCode::kShapeMismatch, "bond endpoint out of range");
    if (bond.begin == bond.end)
      throw Error(ErrorCode::kSyntaxError, "bond joins an atom to itself");
    if (bond_between(bond.begin, bond.end) != nullptr)
      throw Error(ErrorCode::kSyntaxError, "duplicate bond");
    adjacency_[bond.begin].push_back({ bond.end, b });
    adjacency_[bond.end].push_back({ bond.begin, b });
  }
  derive();
}

const Bond *MoleculeGraph::bond_between(std::size_t i, std::size_t j) const {
  if (i >= adjacency_.size())
    return nullptr;
  for (const Neighbor &nb: adjacency_[i])
    if (nb.atom == j)
      return &bonds_[nb.bond];
  return nullptr;
}

void MoleculeGraph::set_reference_conformation(Matrix coords) {
  if (static_cast<std::size_t>(coords.rows()) != num_atoms() || coords.cols() != 3)
    throw Error(ErrorCode::kShapeMismatch, "conformation must be n x 3");
  reference_conformation_ = std::move(coords);
}

Vector MoleculeGraph::masses(double scale) const {
  Vector m(static_cast<Eigen::Index>(num_atoms()));
  for (std::size_t i = 0; i < num_atoms(); ++i)
    m[static_cast<Eigen::Index>(i)] = atoms_[i].relative_mass / scale;
  return m;
}

MoleculeGraph MoleculeGraph::permuted(std::span<const std::size_t> perm) const {
  const std::size_t n = num_atoms();
  if (perm.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "permutation length differs from atom count");
  std::vector<std::size_t> new_index(n);
  std::vector<Atom> atoms(n);
  for (std::size_t k = 0; k < n; ++k) {
    new_index[perm[k]] = k;
    atoms[k] = atoms_[perm[k]];
  }
  std::vector<Bond> bonds = bonds_;
  for (Bond &b: bonds) {
    b.begin = new_index[b.begin];
    b.end = new_index[b.end];
  }
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k)
    order[k] = new_index[smiles_order_[k]];

  MoleculeGraph out(std::move(atoms), std::move(bonds), std::move(order));
  if (reference_conformation_) {
    Matrix coords(static_cast<Eigen::Index>(n), 3);
    for (std::size_t k = 0; k < n; ++k)
      coords.row(static_cast<Eigen::Index>(k)) =
          reference_conformation_->row(static_cast<Eigen::Index>(perm[k]));
    out.set_reference_conformation(std::move(coords));
  }
  return out;
}

void MoleculeGraph::derive() {
  const std::size_t n = atoms_.size();
  for (std::size_t i = 0; i < n; ++i) {
    Atom &atom = atoms_[i];
    const ElementInfo *info = find_element(atom.element);
    if (info == nullptr)
      throw Error(ErrorCode::kUnknownElement, "element '" + atom.element + "'");
    if (info->atomic_number == 1)
      throw Error(ErrorCode::kUnsupportedFeature, "hydrogen atoms must be implicit");
    atom.relative_mass = info->standard_weight;
    atom.degree = static_cast<int>(adjacency_[i].size());
    atom.num_hydrogens = std::clamp(atom.num_hydrogens, 0, 4);
  }

  const std::vector<bool> ring = find_ring_bonds(n, bonds_, adjacency_);
  std::vector<int> n_double(n, 0), n_triple(n, 0), n_unsaturated(n, 0);
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    Bond &bond = bonds_[b];
    bond.in_ring = ring[b];
    for (std::size_t end: { bond.begin, bond.end }) {
      if (bond.order == BondOrder::kDouble)
        ++n_double[end];
      if (bond.order == BondOrder::kTriple)
        ++n_triple[end];
      if (is_multiple(bond.order))
        ++n_unsaturated[end];
    }
  }
  // A bond is conjugated when it is aromatic, when it is a multiple bond
  // adjacent to another multiple bond, or when it is a single bond whose
  // endpoints both carry a multiple bond elsewhere.
  for (Bond &bond: bonds_) {
    const int own = is_multiple(bond.order) ? 1 : 0;
    const int at_begin = n_unsaturated[bond.begin] - own;
    const int at_end = n_unsaturated[bond.end] - own;
    if (bond.order == BondOrder::kAromatic)
      bond.is_conjugated = true;
    else if (own)
      bond.is_conjugated = at_begin > 0 || at_end > 0;
    else
      bond.is_conjugated = at_begin > 0 && at_end > 0;
  }
  for (std::size_t i = 0; i < n; ++i)
    atoms_[i].hybridization = guess_hybridization(atoms_[i], n_double[i], n_triple[i]);

  auto [af, bf] = featurize(*this);
  atom_features_ = std::move(af);
  bond_features_ = std::move(bf);
}

std::pair<Matrix, Matrix> featurize(const MoleculeGraph &mol) {
  const auto n = static_cast<Eigen::Index>(mol.num_atoms());
  Matrix af = Matrix::Zero(n, MoleculeGraph::kAtomFeatureWidth);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Atom &atom = mol.atom(static_cast<std::size_t>(i));
    auto it = std::find(kFeatureElements.begin(), kFeatureElements.end(), atom.element);
    af(i, it - kFeatureElements.begin()) = 1.0;  // "other" is slot 15
    af(i, 16 + std::min(atom.degree, 5)) = 1.0;
    af(i, 22) = atom.formal_charge;
    af(i, 23) = atom.radical_electrons;
    af(i, 24 + static_cast<int>(atom.hybridization)) = 1.0;
    af(i, 30) = atom.is_aromatic ? 1.0 : 0.0;
    af(i, 31 + std::clamp(atom.num_hydrogens, 0, 4)) = 1.0;
    if (atom.chirality != Chirality::kNone) {
      af(i, 36) = 1.0;
      af(i, atom.chirality == Chirality::kCW ? 37 : 38) = 1.0;
    }
  }

  const auto nb = static_cast<Eigen::Index>(mol.num_bonds());
  Matrix bf = Matrix::Zero(nb, MoleculeGraph::kBondFeatureWidth);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Bond &bond = mol.bond(static_cast<std::size_t>(b));
    bf(b, static_cast<int>(bond.order)) = 1.0;
    bf(b, 4) = bond.is_conjugated ? 1.0 : 0.0;
    bf(b, 5) = bond.in_ring ? 1.0 : 0.0;
    bf(b, 6 + static_cast<int>(bond.stereo)) = 1.0;
  }
  return { std::move(af), std::move(bf) };
}

}  // namespace hamforge::chem
