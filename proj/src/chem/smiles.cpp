//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "hamforge/chem/smiles.h"

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hamforge/chem/element.h"
#include "hamforge/error.h"

namespace hamforge::chem {
namespace {
  struct ParsedAtom {
    Atom atom;
    bool bracket = false;
  };

  struct ParsedBond {
    Bond bond;
    char direction = 0;  // '/' or '\\' when written with a directional symbol
    std::size_t direction_from = 0;
  };

  struct RingOpening {
    std::size_t atom;
    char symbol;
    std::size_t offset;
  };

  [[noreturn]] void syntax_error(const std::string &msg, std::size_t offset) {
    throw Error(ErrorCode::kSyntaxError, msg + " at offset " + std::to_string(offset),
                static_cast<std::int64_t>(offset));
  }

  [[noreturn]] void unsupported(const std::string &msg, std::size_t offset) {
    throw Error(ErrorCode::kUnsupportedFeature, msg + " at offset " + std::to_string(offset),
                static_cast<std::int64_t>(offset));
  }

  bool is_bond_symbol(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\';
  }

  BondOrder order_of(char symbol) {
    switch (symbol) {
    case '=':
      return BondOrder::kDouble;
    case '#':
      return BondOrder::kTriple;
    case ':':
      return BondOrder::kAromatic;
    default:
      return BondOrder::kSingle;
    }
  }

  int order_value(BondOrder order) {
    switch (order) {
    case BondOrder::kDouble:
      return 2;
    case BondOrder::kTriple:
      return 3;
    default:
      return 1;
    }
  }

  class SmilesParser {
  public:
    explicit SmilesParser(std::string_view text): text_(text) { }

    MoleculeGraph parse() {
      if (text_.empty())
        syntax_error("empty SMILES", 0);
      for (std::size_t i = 0; i < text_.size(); ++i)
        if (static_cast<unsigned char>(text_[i]) > 127
            || std::isspace(static_cast<unsigned char>(text_[i])))
          syntax_error("non-ASCII or whitespace character", i);

      while (pos_ < text_.size()) {
        const char c = text_[pos_];
        if (c == '(') {
          if (!prev_)
            syntax_error("branch without a preceding atom", pos_);
          if (pending_)
            syntax_error("bond symbol before branch", pos_);
          branches_.push_back(*prev_);
          ++pos_;
        } else if (c == ')') {
          if (branches_.empty())
            syntax_error("unmatched ')'", pos_);
          if (pending_)
            syntax_error("dangling bond symbol", pos_);
          prev_ = branches_.back();
          branches_.pop_back();
          ++pos_;
        } else if (is_bond_symbol(c)) {
          if (pending_ || !prev_)
            syntax_error("unexpected bond symbol", pos_);
          pending_ = c;
          pending_offset_ = pos_++;
        } else if (c == '.') {
          unsupported("multi-fragment SMILES", pos_);
        } else if (c == '>') {
          unsupported("reaction SMILES", pos_);
        } else if (c == '*') {
          unsupported("wildcard atom", pos_);
        } else if (c == '$') {
          unsupported("quadruple bond", pos_);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
          ring_closure();
        } else if (c == '[') {
          add_atom(bracket_atom());
        } else {
          add_atom(organic_atom());
        }
      }
      if (pending_)
        syntax_error("dangling bond symbol", pending_offset_);
      if (!branches_.empty())
        syntax_error("unclosed branch", text_.size());
      if (!rings_.empty())
        throw Error(ErrorCode::kUnbalancedRingBond,
                    "ring bond " + std::to_string(rings_.begin()->first) + " never closed",
                    static_cast<std::int64_t>(rings_.begin()->second.offset));
      return build();
    }

  private:
    ParsedAtom organic_atom() {
      const char c = text_[pos_];
      ParsedAtom pa;
      if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
        pa.atom.element = "Cl";
        pos_ += 2;
        return pa;
      }
      if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
        pa.atom.element = "Br";
        pos_ += 2;
        return pa;
      }
      switch (c) {
      case 'B':
      case 'C':
      case 'N':
      case 'O':
      case 'P':
      case 'S':
      case 'F':
      case 'I':
        pa.atom.element = std::string(1, c);
        break;
      case 'b':
      case 'c':
      case 'n':
      case 'o':
      case 'p':
      case 's':
        pa.atom.element = std::string(1, static_cast<char>(std::toupper(c)));
        pa.atom.is_aromatic = true;
        break;
      default:
        if (std::isupper(static_cast<unsigned char>(c)))
          throw Error(ErrorCode::kUnknownElement,
                      "'" + std::string(1, c) + "' outside brackets at offset "
                          + std::to_string(pos_),
                      static_cast<std::int64_t>(pos_));
        syntax_error("unexpected character '" + std::string(1, c) + "'", pos_);
      }
      ++pos_;
      return pa;
    }

    ParsedAtom bracket_atom() {
      const std::size_t open = pos_++;
      ParsedAtom pa;
      pa.bracket = true;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        unsupported("isotope label", pos_);
      if (pos_ >= text_.size())
        syntax_error("unterminated bracket atom", open);

      const char c = text_[pos_];
      if (c == '*')
        unsupported("wildcard atom", pos_);
      if (std::islower(static_cast<unsigned char>(c))) {
        // aromatic: se, as, te, then single letters
        for (std::string_view two: { "se", "as", "te" }) {
          if (text_.substr(pos_, 2) == two) {
            pa.atom.element = { static_cast<char>(std::toupper(two[0])), two[1] };
            pos_ += 2;
            break;
          }
        }
        if (pa.atom.element.empty()) {
          if (std::string_view("bcnops").find(c) == std::string_view::npos)
            throw Error(ErrorCode::kUnknownElement,
                        "aromatic symbol '" + std::string(1, c) + "'",
                        static_cast<std::int64_t>(pos_));
          pa.atom.element = std::string(1, static_cast<char>(std::toupper(c)));
          ++pos_;
        }
        pa.atom.is_aromatic = true;
      } else if (std::isupper(static_cast<unsigned char>(c))) {
        std::string sym(1, c);
        if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
          std::string two = sym + text_[pos_ + 1];
          if (find_element(two) != nullptr)
            sym = two;
        }
        if (find_element(sym) == nullptr)
          throw Error(ErrorCode::kUnknownElement, "element '" + sym + "'",
                      static_cast<std::int64_t>(pos_));
        pa.atom.element = sym;
        pos_ += sym.size();
      } else {
        syntax_error("expected element symbol", pos_);
      }
      if (pa.atom.element == "H")
        unsupported("explicit hydrogen atom", open);

      if (pos_ < text_.size() && text_[pos_] == '@') {
        ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '@') {
          ++pos_;
          pa.atom.chirality = Chirality::kCW;
        } else {
          pa.atom.chirality = Chirality::kCCW;
        }
        if (pos_ < text_.size() && std::isupper(static_cast<unsigned char>(text_[pos_]))
            && text_[pos_] != 'H')
          unsupported("extended chirality class", pos_);
      }
      if (pos_ < text_.size() && text_[pos_] == 'H') {
        ++pos_;
        pa.atom.num_hydrogens = 1;
        if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          pa.atom.num_hydrogens = text_[pos_++] - '0';
      }
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        const char sign = text_[pos_++];
        int magnitude = 1;
        if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          magnitude = text_[pos_++] - '0';
        } else {
          while (pos_ < text_.size() && text_[pos_] == sign) {
            ++magnitude;
            ++pos_;
          }
        }
        pa.atom.formal_charge = sign == '+' ? magnitude : -magnitude;
      }
      if (pos_ < text_.size() && text_[pos_] == ':') {
        ++pos_;
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
          syntax_error("expected atom class", pos_);
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
          ++pos_;
      }
      if (pos_ >= text_.size() || text_[pos_] != ']')
        syntax_error("expected ']'", pos_);
      ++pos_;
      return pa;
    }

    void add_atom(ParsedAtom pa) {
      const std::size_t idx = atoms_.size();
      atoms_.push_back(std::move(pa));
      if (prev_)
        add_bond(*prev_, idx, pending_.value_or(0), pending_offset_);
      pending_.reset();
      prev_ = idx;
    }

    void add_bond(std::size_t from, std::size_t to, char symbol, std::size_t offset) {
      ParsedBond pb;
      pb.bond.begin = from;
      pb.bond.end = to;
      if (symbol == 0) {
        pb.bond.order = atoms_[from].atom.is_aromatic && atoms_[to].atom.is_aromatic
                            ? BondOrder::kAromatic
                            : BondOrder::kSingle;
      } else {
        pb.bond.order = order_of(symbol);
      }
      if (symbol == '/' || symbol == '\\') {
        pb.direction = symbol;
        pb.direction_from = from;
      }
      for (const ParsedBond &b: bonds_)
        if ((b.bond.begin == from && b.bond.end == to)
            || (b.bond.begin == to && b.bond.end == from))
          syntax_error("duplicate bond", offset);
      if (from == to)
        syntax_error("ring closure to the same atom", offset);
      bonds_.push_back(pb);
    }

    void ring_closure() {
      const std::size_t start = pos_;
      int label;
      if (text_[pos_] == '%') {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))
            || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
          syntax_error("expected two digits after '%'", pos_);
        label = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        pos_ += 3;
      } else {
        label = text_[pos_++] - '0';
      }
      if (!prev_)
        syntax_error("ring closure without a preceding atom", start);

      auto it = rings_.find(label);
      if (it == rings_.end()) {
        rings_[label] = { *prev_, pending_.value_or(0), start };
        pending_.reset();
        return;
      }
      const RingOpening open = it->second;
      rings_.erase(it);
      char symbol = pending_.value_or(0);
      if (open.symbol != 0 && symbol != 0 && open.symbol != symbol) {
        const bool both_directional = (open.symbol == '/' || open.symbol == '\\')
                                      && (symbol == '/' || symbol == '\\');
        if (!both_directional)
          syntax_error("conflicting ring-closure bond symbols", start);
      }
      std::size_t from = *prev_;
      std::size_t to = open.atom;
      if (symbol == 0 && open.symbol != 0) {
        symbol = open.symbol;
        std::swap(from, to);
      }
      add_bond(from, to, symbol, start);
      pending_.reset();
    }

    void fill_hydrogens(const std::vector<std::vector<std::size_t>> &incident) {
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        Atom &atom = atoms_[i].atom;
        int bond_sum = 0;
        for (std::size_t b: incident[i])
          bond_sum += order_value(bonds_[b].bond.order);
        const auto valences = default_valences(atom.element);
        if (atoms_[i].bracket) {
          if (!atom.is_aromatic && atom.formal_charge == 0 && !valences.empty()) {
            const int explicit_valence = bond_sum + atom.num_hydrogens;
            if (explicit_valence < valences.front())
              atom.radical_electrons = valences.front() - explicit_valence;
          }
          continue;
        }
        atom.num_hydrogens = 0;
        if (valences.empty())
          continue;
        if (atom.is_aromatic) {
          // one valence unit is taken by the delocalized pi system
          atom.num_hydrogens = std::max(0, valences.front() - bond_sum - 1);
          continue;
        }
        for (int v: valences) {
          if (v >= bond_sum) {
            atom.num_hydrogens = v - bond_sum;
            break;
          }
        }
      }
    }

    void assign_double_bond_stereo(const std::vector<std::vector<std::size_t>> &incident) {
      // Orientation of a directional bond as seen from a double-bond end.
      auto orientation = [&](std::size_t end, std::size_t skip) -> int {
        for (std::size_t b: incident[end]) {
          if (b == skip || bonds_[b].direction == 0)
            continue;
          const ParsedBond &pb = bonds_[b];
          const std::size_t neighbor = pb.bond.other(end);
          const int sign = pb.direction == '/' ? 1 : -1;
          return pb.direction_from == neighbor ? sign : -sign;
        }
        return 0;
      };
      for (std::size_t b = 0; b < bonds_.size(); ++b) {
        Bond &bond = bonds_[b].bond;
        if (bond.order != BondOrder::kDouble)
          continue;
        const int left = orientation(bond.begin, b);
        const int right = orientation(bond.end, b);
        if (left != 0 && right != 0)
          bond.stereo = left != right ? BondStereo::kE : BondStereo::kZ;
      }
    }

    MoleculeGraph build() {
      std::vector<std::vector<std::size_t>> incident(atoms_.size());
      for (std::size_t b = 0; b < bonds_.size(); ++b) {
        incident[bonds_[b].bond.begin].push_back(b);
        incident[bonds_[b].bond.end].push_back(b);
      }
      fill_hydrogens(incident);
      assign_double_bond_stereo(incident);

      std::vector<Atom> atoms;
      atoms.reserve(atoms_.size());
      for (ParsedAtom &pa: atoms_)
        atoms.push_back(std::move(pa.atom));
      std::vector<Bond> bonds;
      bonds.reserve(bonds_.size());
      for (const ParsedBond &pb: bonds_)
        bonds.push_back(pb.bond);
      return MoleculeGraph(std::move(atoms), std::move(bonds));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<ParsedAtom> atoms_;
    std::vector<ParsedBond> bonds_;
    std::vector<std::size_t> branches_;
    std::optional<std::size_t> prev_;
    std::optional<char> pending_;
    std::size_t pending_offset_ = 0;
    std::map<int, RingOpening> rings_;
  };
}  // namespace

MoleculeGraph parse_smiles(std::string_view text) {
  return SmilesParser(text).parse();
}

}  // namespace hamforge::chem
