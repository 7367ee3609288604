//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_CHEM_ELEMENT_H_
#define HAMFORGE_CHEM_ELEMENT_H_

#include <span>
#include <string_view>

namespace hamforge::chem {

struct ElementInfo {
  std::string_view symbol;
  int atomic_number;
  double standard_weight;
};

// nullptr when the symbol is not a known element (case-sensitive).
const ElementInfo *find_element(std::string_view symbol);

// Normal valences used to fill implicit hydrogens, ascending. Empty for
// elements outside the SMILES organic subset.
std::span<const int> default_valences(std::string_view symbol);

}  // namespace hamforge::chem

#endif  // HAMFORGE_CHEM_ELEMENT_H_
