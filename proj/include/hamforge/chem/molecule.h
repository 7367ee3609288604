//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_CHEM_MOLECULE_H_
#define HAMFORGE_CHEM_MOLECULE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamforge/matrix.h"

namespace hamforge::chem {

enum class Hybridization : std::uint8_t { kSP, kSP2, kSP3, kSP3D, kSP3D2, kOther };
enum class Chirality : std::uint8_t { kNone, kCW, kCCW };
enum class BondOrder : std::uint8_t { kSingle, kDouble, kTriple, kAromatic };
enum class BondStereo : std::uint8_t { kNone, kAny, kZ, kE };

struct Atom {
  std::string element;
  double relative_mass = 0.0;
  int degree = 0;
  int formal_charge = 0;
  bool is_aromatic = false;
  int num_hydrogens = 0;
  int radical_electrons = 0;
  Hybridization hybridization = Hybridization::kOther;
  Chirality chirality = Chirality::kNone;
};

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::kSingle;
  bool is_conjugated = false;
  bool in_ring = false;
  BondStereo stereo = BondStereo::kNone;

  std::size_t other(std::size_t atom) const { return atom == begin ? end : begin; }
};

struct Neighbor {
  std::size_t atom;
  std::size_t bond;
};

// Heavy-atom molecular graph. Hydrogens are carried as per-atom counts.
//
// Construction validates the graph, then derives degrees, ring membership,
// conjugation, hybridization and the fixed-width feature matrices. Each bond
// is stored once and is reachable from both endpoints.
class MoleculeGraph {
public:
  static constexpr int kAtomFeatureWidth = 39;
  static constexpr int kBondFeatureWidth = 10;

  MoleculeGraph() = default;

  // `smiles_order[k]` is the atom at the k-th position of the source line
  // notation. Empty means identity order. Throws Error on invalid input.
  MoleculeGraph(std::vector<Atom> atoms, std::vector<Bond> bonds,
                std::vector<std::size_t> smiles_order = {});

  std::size_t num_atoms() const { return atoms_.size(); }
  std::size_t num_bonds() const { return bonds_.size(); }

  const std::vector<Atom> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }
  const Atom &atom(std::size_t i) const { return atoms_[i]; }
  const Bond &bond(std::size_t b) const { return bonds_[b]; }
  const std::vector<std::size_t> &smiles_order() const { return smiles_order_; }

  std::span<const Neighbor> neighbors(std::size_t atom) const {
    return adjacency_[atom];
  }

  // Bond record joining `i` and `j`, or nullptr.
  const Bond *bond_between(std::size_t i, std::size_t j) const;

  const Matrix &atom_features() const { return atom_features_; }
  const Matrix &bond_features() const { return bond_features_; }

  const std::optional<Matrix> &reference_conformation() const {
    return reference_conformation_;
  }
  // Throws ShapeMismatch unless `coords` is num_atoms() x 3.
  void set_reference_conformation(Matrix coords);

  // Standard atomic weights divided by `scale`, one per atom.
  Vector masses(double scale = 50.0) const;

  // Relabels atoms so that new atom k is old atom perm[k]. Bonds follow,
  // smiles_order is mapped so that it names the same physical atoms.
  MoleculeGraph permuted(std::span<const std::size_t> perm) const;

private:
  void derive();

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::size_t> smiles_order_;
  std::vector<std::vector<Neighbor>> adjacency_;
  Matrix atom_features_;
  Matrix bond_features_;
  std::optional<Matrix> reference_conformation_;
};

// Per-atom and per-bond feature vectors; widths 39 and 10. Layouts:
//
//  atom: element one-hot {B,C,N,O,F,Si,P,S,Cl,As,Se,Br,Te,I,At,other} (16),
//        degree one-hot 0..5 (6), formal charge (1), radical electrons (1),
//        hybridization one-hot {SP,SP2,SP3,SP3D,SP3D2,OTHER} (6),
//        aromatic (1), hydrogen count one-hot 0..4 (5), chiral flag (1),
//        chirality type {CW,CCW} (2)
//  bond: order one-hot {single,double,triple,aromatic} (4), conjugated (1),
//        in ring (1), stereo one-hot {NONE,ANY,Z,E} (4)
std::pair<Matrix, Matrix> featurize(const MoleculeGraph &mol);

}  // namespace hamforge::chem

#endif  // HAMFORGE_CHEM_MOLECULE_H_
