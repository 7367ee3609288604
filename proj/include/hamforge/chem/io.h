//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_CHEM_IO_H_
#define HAMFORGE_CHEM_IO_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hamforge/chem/molecule.h"
#include "hamforge/matrix.h"

namespace hamforge::chem {

struct Record {
  std::string smiles;
  MoleculeGraph mol;
  std::vector<double> targets;
  // masked[t] is set when target t was an empty cell; such targets are
  // excluded from losses and metrics.
  std::vector<bool> masked;
  // Zero-based data row in the source file.
  std::size_t row = 0;
};

struct Dataset {
  std::vector<std::string> target_names;
  std::vector<Record> records;
  std::size_t skipped = 0;
};

// Reads "smiles,<t1>,...,<tk>" CSV. Rows that fail to parse are skipped and
// counted. Throws kIoError or kHeaderMismatch.
Dataset read_dataset(const std::filesystem::path &path);

struct XyzFrame {
  std::vector<std::string> elements;
  Matrix coords;  // n x 3, Angstrom
  std::string comment;
};

// One or more concatenated frames. Throws kIoError, kCountMismatch or
// kMalformedLine.
std::vector<XyzFrame> read_xyz(const std::filesystem::path &path);
void write_xyz(const std::filesystem::path &path, const std::vector<XyzFrame> &frames);

std::vector<XyzFrame> parse_xyz(const std::string &text);
std::string format_xyz(const std::vector<XyzFrame> &frames);

// V2000 SDF records. Hydrogens are folded into heavy-atom counts and the
// heavy-atom coordinates become the reference conformation. Throws
// kIoError, kUnsupportedVersion or kTruncatedRecord.
std::vector<MoleculeGraph> read_sdf(const std::filesystem::path &path);
std::vector<MoleculeGraph> parse_sdf(const std::string &text);

// Attaches the coordinates of `frame` to `mol` after checking that the
// heavy-atom element sequence matches. Hydrogen rows in the frame are
// dropped. Returns false on mismatch.
bool attach_conformation(MoleculeGraph &mol, const XyzFrame &frame);
bool attach_conformation(MoleculeGraph &mol, const MoleculeGraph &with_coords);

std::string read_text_file(const std::filesystem::path &path);

}  // namespace hamforge::chem

#endif  // HAMFORGE_CHEM_IO_H_
