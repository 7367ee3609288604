//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_CHEM_SMILES_H_
#define HAMFORGE_CHEM_SMILES_H_

#include <string_view>

#include "hamforge/chem/molecule.h"

namespace hamforge::chem {

// Parses a single-fragment SMILES string.
//
// Supported: the organic subset (B C N O P S F Cl Br I and aromatic
// b c n o p s), bracket atoms with element, @/@@, H count and charge,
// bond symbols - = # : / \, branches, ring closures 0-9 and %nn.
// Atoms are numbered in order of first appearance, so smiles_order() of the
// result is the identity. Implicit hydrogens are filled from the lowest
// normal valence that accommodates the explicit bonds.
//
// Throws Error with kUnsupportedFeature (isotopes, '*', '.', reactions,
// explicit hydrogen atoms), kUnbalancedRingBond, kUnknownElement or
// kSyntaxError (detail() = byte offset).
MoleculeGraph parse_smiles(std::string_view text);

}  // namespace hamforge::chem

#endif  // HAMFORGE_CHEM_SMILES_H_
