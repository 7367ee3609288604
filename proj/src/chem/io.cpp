//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/chem/io.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hamforge/chem/element.h"
#include "hamforge/chem/smiles.h"
#include "hamforge/error.h"

namespace hamforge::chem {
namespace {
  std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
      s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
      s.remove_suffix(1);
    return s;
  }

  std::vector<std::string> split_lines(const std::string &text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      lines.push_back(line);
    }
    return lines;
  }

  std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
        ++i;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
        ++j;
      if (j > i)
        out.push_back(s.substr(i, j - i));
      i = j;
    }
    return out;
  }

  std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (s.empty())
      return std::nullopt;
    if (s.front() == '+')
      s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      return std::nullopt;
    return v;
  }

  std::optional<long> to_long(std::string_view s) {
    s = trim(s);
    if (s.empty())
      return std::nullopt;
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      return std::nullopt;
    return v;
  }

  // RFC 4180 fields; quotes may wrap a field and "" escapes a quote.
  std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          fields.back() += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.emplace_back();
      } else {
        fields.back() += c;
      }
    }
    return fields;
  }

  std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  }

  std::optional<std::array<double, 3>> parse_xyz_atom(std::string_view line,
                                                      std::string *element) {
    auto tok = split_ws(line);
    if (tok.size() < 4)
      return std::nullopt;
    std::array<double, 3> xyz {};
    for (int k = 0; k < 3; ++k) {
      auto v = to_double(tok[static_cast<std::size_t>(k) + 1]);
      if (!v)
        return std::nullopt;
      xyz[static_cast<std::size_t>(k)] = *v;
    }
    if (element != nullptr)
      *element = std::string(tok[0]);
    return xyz;
  }

  int sdf_charge_code(long code) {
    switch (code) {
    case 1:
      return 3;
    case 2:
      return 2;
    case 3:
      return 1;
    case 5:
      return -1;
    case 6:
      return -2;
    case 7:
      return -3;
    default:
      return 0;
    }
  }

  std::string_view column(const std::string &line, std::size_t begin, std::size_t len) {
    if (begin >= line.size())
      return {};
    return std::string_view(line).substr(begin, len);
  }

  [[noreturn]] void truncated(std::size_t record, const std::string &what) {
    throw Error(ErrorCode::kTruncatedRecord,
                fmt::format("SDF record {}: {}", record, what),
                static_cast<std::int64_t>(record));
  }

  struct SdfAtom {
    std::string element;
    double x, y, z;
    int charge;
  };

  struct SdfBond {
    std::size_t a, b;
    int order;
    int stereo;
  };

  MoleculeGraph build_sdf_molecule(const std::vector<SdfAtom> &raw,
                                   const std::vector<SdfBond> &raw_bonds) {
    std::vector<long> heavy_index(raw.size(), -1);
    std::vector<Atom> atoms;
    Matrix coords(0, 3);
    std::vector<std::array<double, 3>> xyz;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].element == "H")
        continue;
      heavy_index[i] = static_cast<long>(atoms.size());
      Atom atom;
      atom.element = raw[i].element;
      atom.formal_charge = raw[i].charge;
      atoms.push_back(atom);
      xyz.push_back({ raw[i].x, raw[i].y, raw[i].z });
    }

    std::vector<Bond> bonds;
    std::vector<int> explicit_h(atoms.size(), 0);
    std::vector<int> bond_sum(atoms.size(), 0);
    std::vector<int> n_aromatic(atoms.size(), 0);
    for (const SdfBond &rb: raw_bonds) {
      const long ha = heavy_index[rb.a], hb = heavy_index[rb.b];
      if (ha < 0 && hb < 0)
        continue;
      if (ha < 0 || hb < 0) {
        const auto heavy = static_cast<std::size_t>(ha < 0 ? hb : ha);
        ++explicit_h[heavy];
        continue;
      }
      Bond bond;
      bond.begin = static_cast<std::size_t>(ha);
      bond.end = static_cast<std::size_t>(hb);
      switch (rb.order) {
      case 2:
        bond.order = BondOrder::kDouble;
        break;
      case 3:
        bond.order = BondOrder::kTriple;
        break;
      case 4:
        bond.order = BondOrder::kAromatic;
        break;
      default:
        bond.order = BondOrder::kSingle;
      }
      if (bond.order == BondOrder::kDouble && rb.stereo == 3)
        bond.stereo = BondStereo::kAny;
      const int units = bond.order == BondOrder::kDouble    ? 2
                        : bond.order == BondOrder::kTriple ? 3
                                                            : 1;
      for (std::size_t end: { bond.begin, bond.end }) {
        bond_sum[end] += units;
        if (bond.order == BondOrder::kAromatic) {
          atoms[end].is_aromatic = true;
          ++n_aromatic[end];
        }
      }
      bonds.push_back(bond);
    }

    for (std::size_t i = 0; i < atoms.size(); ++i) {
      Atom &atom = atoms[i];
      atom.num_hydrogens = explicit_h[i];
      const auto valences = default_valences(atom.element);
      if (atom.formal_charge != 0 || valences.empty())
        continue;
      const int used = bond_sum[i] + explicit_h[i] + (atom.is_aromatic ? 1 : 0);
      if (atom.is_aromatic) {
        atom.num_hydrogens += std::max(0, valences.front() - used);
        continue;
      }
      for (int v: valences) {
        if (v >= used) {
          atom.num_hydrogens += v - used;
          break;
        }
      }
    }

    coords.resize(static_cast<Eigen::Index>(xyz.size()), 3);
    for (std::size_t i = 0; i < xyz.size(); ++i)
      for (int k = 0; k < 3; ++k)
        coords(static_cast<Eigen::Index>(i), k) = xyz[i][static_cast<std::size_t>(k)];

    MoleculeGraph mol(std::move(atoms), std::move(bonds));
    mol.set_reference_conformation(std::move(coords));
    return mol;
  }
}  // namespace

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset read_dataset(const std::filesystem::path &path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.empty())
    throw Error(ErrorCode::kHeaderMismatch, path.string() + " is empty");

  std::vector<std::string> header = split_csv(lines[0]);
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0)
    header[0].erase(0, 3);
  if (header.empty() || lowercase(trim(header[0])) != "smiles")
    throw Error(ErrorCode::kHeaderMismatch,
                path.string() + ": first column must be 'smiles'");

  Dataset ds;
  for (std::size_t k = 1; k < header.size(); ++k)
    ds.target_names.emplace_back(trim(header[k]));

  std::size_t row = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty())
      continue;
    const std::size_t this_row = row++;
    std::vector<std::string> fields = split_csv(lines[li]);
    if (fields.size() != header.size()) {
      ++ds.skipped;
      continue;
    }
    Record rec;
    rec.row = this_row;
    rec.smiles = std::string(trim(fields[0]));
    bool ok = true;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (trim(fields[k]).empty()) {
        rec.targets.push_back(0.0);
        rec.masked.push_back(true);
        continue;
      }
      auto v = to_double(fields[k]);
      if (!v) {
        ok = false;
        break;
      }
      rec.targets.push_back(*v);
      rec.masked.push_back(false);
    }
    if (!ok) {
      ++ds.skipped;
      continue;
    }
    try {
      rec.mol = parse_smiles(rec.smiles);
    } catch (const Error &e) {
      spdlog::debug("{} row {}: {}", path.string(), this_row, e.what());
      ++ds.skipped;
      continue;
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.skipped > 0)
    spdlog::warn("{}: skipped {} unparsable row(s)", path.string(), ds.skipped);
  return ds;
}

std::vector<XyzFrame> parse_xyz(const std::string &text) {
  const std::vector<std::string> lines = split_lines(text);
  std::vector<XyzFrame> frames;
  std::size_t li = 0;
  while (li < lines.size()) {
    if (trim(lines[li]).empty()) {
      ++li;
      continue;
    }
    auto count = to_long(lines[li]);
    if (!count) {
      if (parse_xyz_atom(lines[li], nullptr) && !frames.empty())
        throw Error(ErrorCode::kCountMismatch,
                    fmt::format("line {}: more atom lines than the count declares", li + 1),
                    static_cast<std::int64_t>(li + 1));
      throw Error(ErrorCode::kMalformedLine,
                  fmt::format("line {}: expected an atom count", li + 1),
                  static_cast<std::int64_t>(li + 1));
    }
    if (*count < 0)
      throw Error(ErrorCode::kMalformedLine, fmt::format("line {}: negative count", li + 1));
    XyzFrame frame;
    const auto n = static_cast<std::size_t>(*count);
    if (li + 1 >= lines.size())
      throw Error(ErrorCode::kCountMismatch, "missing comment line",
                  static_cast<std::int64_t>(li + 1));
    frame.comment = lines[li + 1];
    frame.coords.resize(static_cast<Eigen::Index>(n), 3);
    li += 2;
    for (std::size_t a = 0; a < n; ++a, ++li) {
      if (li >= lines.size() || trim(lines[li]).empty())
        throw Error(ErrorCode::kCountMismatch,
                    fmt::format("frame {} declares {} atoms but has {}", frames.size(), n, a),
                    static_cast<std::int64_t>(li + 1));
      std::string element;
      auto xyz = parse_xyz_atom(lines[li], &element);
      if (!xyz) {
        if (to_long(lines[li]))
          throw Error(ErrorCode::kCountMismatch,
                      fmt::format("frame {} declares {} atoms but has {}", frames.size(), n, a),
                      static_cast<std::int64_t>(li + 1));
        throw Error(ErrorCode::kMalformedLine, fmt::format("line {}: '{}'", li + 1, lines[li]),
                    static_cast<std::int64_t>(li + 1));
      }
      frame.elements.push_back(element);
      for (int k = 0; k < 3; ++k)
        frame.coords(static_cast<Eigen::Index>(a), k) = (*xyz)[static_cast<std::size_t>(k)];
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<XyzFrame> read_xyz(const std::filesystem::path &path) {
  return parse_xyz(read_text_file(path));
}

std::string format_xyz(const std::vector<XyzFrame> &frames) {
  std::string out;
  for (const XyzFrame &f: frames) {
    out += fmt::format("{}\n{}\n", f.elements.size(), f.comment);
    for (std::size_t i = 0; i < f.elements.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out += fmt::format("{} {:.10f} {:.10f} {:.10f}\n", f.elements[i], f.coords(r, 0),
                         f.coords(r, 1), f.coords(r, 2));
    }
  }
  return out;
}

void write_xyz(const std::filesystem::path &path, const std::vector<XyzFrame> &frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << format_xyz(frames);
  if (!out)
    throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::vector<MoleculeGraph> parse_sdf(const std::string &text) {
  const std::vector<std::string> lines = split_lines(text);
  std::vector<MoleculeGraph> out;
  std::size_t li = 0;
  std::size_t record = 0;
  while (li < lines.size()) {
    if (trim(lines[li]).empty()) {
      ++li;
      continue;
    }
    if (li + 3 >= lines.size())
      truncated(record, "missing header or counts line");
    const std::string &counts = lines[li + 3];
    if (counts.find("V3000") != std::string::npos)
      throw Error(ErrorCode::kUnsupportedVersion, "V3000 connection tables are not supported",
                  static_cast<std::int64_t>(record));
    auto n_atoms = to_long(column(counts, 0, 3));
    auto n_bonds = to_long(column(counts, 3, 3));
    if (!n_atoms || !n_bonds || *n_atoms < 0 || *n_bonds < 0)
      truncated(record, "unreadable counts line");
    li += 4;

    std::vector<SdfAtom> atoms;
    for (long a = 0; a < *n_atoms; ++a, ++li) {
      if (li >= lines.size() || lines[li].rfind("M  ", 0) == 0 || lines[li] == "$$$$")
        truncated(record, "atom block ends early");
      const std::string &line = lines[li];
      auto x = to_double(column(line, 0, 10));
      auto y = to_double(column(line, 10, 10));
      auto z = to_double(column(line, 20, 10));
      std::string_view sym = trim(column(line, 31, 3));
      if (!x || !y || !z || sym.empty())
        truncated(record, fmt::format("bad atom line '{}'", line));
      if (find_element(sym) == nullptr)
        throw Error(ErrorCode::kUnknownElement, std::string(sym),
                    static_cast<std::int64_t>(record));
      auto charge = to_long(column(line, 36, 3));
      atoms.push_back({ std::string(sym), *x, *y, *z, sdf_charge_code(charge.value_or(0)) });
    }

    if (*n_bonds == 0 && atoms.size() > 1)
      truncated(record, "multi-atom record without a bond block");
    std::vector<SdfBond> bonds;
    for (long b = 0; b < *n_bonds; ++b, ++li) {
      if (li >= lines.size() || lines[li].rfind("M  ", 0) == 0 || lines[li] == "$$$$")
        truncated(record, "bond block ends early");
      const std::string &line = lines[li];
      auto a1 = to_long(column(line, 0, 3));
      auto a2 = to_long(column(line, 3, 3));
      auto order = to_long(column(line, 6, 3));
      auto stereo = to_long(column(line, 9, 3));
      if (!a1 || !a2 || !order || *a1 < 1 || *a2 < 1 || *a1 > *n_atoms || *a2 > *n_atoms)
        truncated(record, fmt::format("bad bond line '{}'", line));
      bonds.push_back({ static_cast<std::size_t>(*a1 - 1), static_cast<std::size_t>(*a2 - 1),
                        static_cast<int>(*order), static_cast<int>(stereo.value_or(0)) });
    }

    bool charges_reset = false;
    while (li < lines.size() && lines[li] != "$$$$") {
      const std::string &line = lines[li++];
      if (line.rfind("M  CHG", 0) == 0) {
        if (!charges_reset) {
          for (SdfAtom &a: atoms)
            a.charge = 0;
          charges_reset = true;
        }
        auto tok = split_ws(std::string_view(line).substr(6));
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          auto idx = to_long(tok[k]);
          auto chg = to_long(tok[k + 1]);
          if (idx && chg && *idx >= 1 && *idx <= static_cast<long>(atoms.size()))
            atoms[static_cast<std::size_t>(*idx - 1)].charge = static_cast<int>(*chg);
        }
      }
    }
    if (li < lines.size())
      ++li;  // $$$$

    out.push_back(build_sdf_molecule(atoms, bonds));
    ++record;
  }
  return out;
}

std::vector<MoleculeGraph> read_sdf(const std::filesystem::path &path) {
  return parse_sdf(read_text_file(path));
}

bool attach_conformation(MoleculeGraph &mol, const XyzFrame &frame) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < frame.elements.size(); ++i)
    if (frame.elements[i] != "H")
      rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.size() != mol.num_atoms())
    return false;
  Matrix coords(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (frame.elements[static_cast<std::size_t>(rows[k])] != mol.atom(k).element)
      return false;
    coords.row(static_cast<Eigen::Index>(k)) = frame.coords.row(rows[k]);
  }
  mol.set_reference_conformation(std::move(coords));
  return true;
}

bool attach_conformation(MoleculeGraph &mol, const MoleculeGraph &with_coords) {
  if (!with_coords.reference_conformation() || with_coords.num_atoms() != mol.num_atoms())
    return false;
  for (std::size_t i = 0; i < mol.num_atoms(); ++i)
    if (mol.atom(i).element != with_coords.atom(i).element)
      return false;
  mol.set_reference_conformation(*with_coords.reference_conformation());
  return true;
}

}  // namespace hamforge::chem
