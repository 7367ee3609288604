//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <fstream>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include <gtest/gtest.h>

#include "hamforge/chem/io.h"
#include "hamforge/chem/molecule.h"
#include "hamforge/chem/smiles.h"
#include "hamforge/error.h"

namespace hamforge::chem {
namespace {
  namespace fs = std::filesystem;

  ErrorCode code_of(const std::function<void()> &fn) {
    try {
      fn();
    } catch (const Error &e) {
      return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::kConfigError;
  }

  fs::path temp_file(const std::string &name, const std::string &content) {
    fs::path p = fs::temp_directory_path() / ("hamforge_chem_" + name);
    std::ofstream(p) << content;
    return p;
  }

  TEST(ParseSmiles, Methane) {
    MoleculeGraph m = parse_smiles("C");
    ASSERT_EQ(m.num_atoms(), 1);
    EXPECT_EQ(m.num_bonds(), 0);
    EXPECT_EQ(m.atom(0).num_hydrogens, 4);
    EXPECT_EQ(m.atom(0).hybridization, Hybridization::kSP3);
  }

  TEST(ParseSmiles, BenzeneRingClosure) {
    MoleculeGraph m = parse_smiles("c1ccccc1");
    ASSERT_EQ(m.num_atoms(), 6);
    ASSERT_EQ(m.num_bonds(), 6);
    for (const Atom &a: m.atoms()) {
      EXPECT_TRUE(a.is_aromatic);
      EXPECT_EQ(a.num_hydrogens, 1);
    }
    for (const Bond &b: m.bonds()) {
      EXPECT_EQ(b.order, BondOrder::kAromatic);
      EXPECT_TRUE(b.in_ring);
      EXPECT_TRUE(b.is_conjugated);
    }
  }

  TEST(ParseSmiles, AceticAcidOrderAndBonds) {
    MoleculeGraph m = parse_smiles("CC(=O)O");
    ASSERT_EQ(m.num_atoms(), 4);
    ASSERT_EQ(m.num_bonds(), 3);
    EXPECT_EQ(m.bond(0).order, BondOrder::kSingle);
    EXPECT_EQ(m.bond(1).order, BondOrder::kDouble);
    EXPECT_EQ(m.bond(2).order, BondOrder::kSingle);
    EXPECT_EQ(m.smiles_order(), (std::vector<std::size_t> { 0, 1, 2, 3 }));
    EXPECT_EQ(m.atom(0).num_hydrogens, 3);
    EXPECT_EQ(m.atom(1).num_hydrogens, 0);
    EXPECT_EQ(m.atom(2).num_hydrogens, 0);
    EXPECT_EQ(m.atom(3).num_hydrogens, 1);
    EXPECT_EQ(m.atom(1).element, "C");
    EXPECT_EQ(m.atom(2).element, "O");
  }

  TEST(ParseSmiles, HeteroaromaticHydrogens) {
    MoleculeGraph pyridine = parse_smiles("c1ccncc1");
    EXPECT_EQ(pyridine.atom(3).num_hydrogens, 0);
    MoleculeGraph pyrrole = parse_smiles("c1cc[nH]c1");
    EXPECT_EQ(pyrrole.atom(3).num_hydrogens, 1);
    MoleculeGraph nmethyl = parse_smiles("Cn1cccc1");
    EXPECT_EQ(nmethyl.atom(1).num_hydrogens, 0);
    MoleculeGraph thiophene = parse_smiles("c1ccsc1");
    EXPECT_EQ(thiophene.atom(3).num_hydrogens, 0);
  }

  TEST(ParseSmiles, BracketAtoms) {
    MoleculeGraph m = parse_smiles("C[N+](=O)[O-]");
    EXPECT_EQ(m.atom(1).formal_charge, 1);
    EXPECT_EQ(m.atom(3).formal_charge, -1);
    EXPECT_EQ(m.atom(1).num_hydrogens, 0);

    MoleculeGraph chiral = parse_smiles("N[C@@H](C)C(=O)O");
    EXPECT_EQ(chiral.atom(1).chirality, Chirality::kCW);
    EXPECT_EQ(chiral.atom(1).num_hydrogens, 1);
    EXPECT_EQ(parse_smiles("N[C@H](C)C(=O)O").atom(1).chirality, Chirality::kCCW);

    MoleculeGraph radical = parse_smiles("[CH3]");
    EXPECT_EQ(radical.atom(0).radical_electrons, 1);
    EXPECT_EQ(parse_smiles("[Na+]").atom(0).formal_charge, 1);
    EXPECT_EQ(parse_smiles("[Fe+++]").atom(0).formal_charge, 3);
  }

  TEST(ParseSmiles, TwoLetterAndPercentRings) {
    MoleculeGraph m = parse_smiles("ClC%12CC%12Br");
    EXPECT_EQ(m.atom(0).element, "Cl");
    EXPECT_EQ(m.atom(4).element, "Br");
    EXPECT_NE(m.bond_between(1, 3), nullptr);
    EXPECT_TRUE(m.bond_between(1, 3)->in_ring);
    EXPECT_FALSE(m.bond_between(0, 1)->in_ring);
  }

  TEST(ParseSmiles, RingBondOrderAtEitherEnd) {
    MoleculeGraph a = parse_smiles("C=1CCCCC1");
    MoleculeGraph b = parse_smiles("C1CCCCC=1");
    EXPECT_EQ(a.bond_between(0, 5)->order, BondOrder::kDouble);
    EXPECT_EQ(b.bond_between(0, 5)->order, BondOrder::kDouble);
  }

  TEST(ParseSmiles, DoubleBondStereo) {
    auto stereo = [](const char *s) {
      MoleculeGraph m = parse_smiles(s);
      for (const Bond &b: m.bonds())
        if (b.order == BondOrder::kDouble)
          return b.stereo;
      return BondStereo::kNone;
    };
    EXPECT_EQ(stereo("F/C=C/F"), BondStereo::kE);
    EXPECT_EQ(stereo("F/C=C\\F"), BondStereo::kZ);
    EXPECT_EQ(stereo("C(\\F)=C/F"), BondStereo::kE);
    EXPECT_EQ(stereo("FC=CF"), BondStereo::kNone);
  }

  TEST(ParseSmiles, Errors) {
    EXPECT_EQ(code_of([] { parse_smiles("[13CH4]"); }), ErrorCode::kUnsupportedFeature);
    EXPECT_EQ(code_of([] { parse_smiles("C*"); }), ErrorCode::kUnsupportedFeature);
    EXPECT_EQ(code_of([] { parse_smiles("CC>>CC"); }), ErrorCode::kUnsupportedFeature);
    EXPECT_EQ(code_of([] { parse_smiles("[Na+].[Cl-]"); }), ErrorCode::kUnsupportedFeature);
    EXPECT_EQ(code_of([] { parse_smiles("C1CC"); }), ErrorCode::kUnbalancedRingBond);
    EXPECT_EQ(code_of([] { parse_smiles("[Xq]"); }), ErrorCode::kUnknownElement);
    EXPECT_EQ(code_of([] { parse_smiles("CX"); }), ErrorCode::kUnknownElement);
    EXPECT_EQ(code_of([] { parse_smiles(""); }), ErrorCode::kSyntaxError);
    EXPECT_EQ(code_of([] { parse_smiles("C(C"); }), ErrorCode::kSyntaxError);
    EXPECT_EQ(code_of([] { parse_smiles("C=1CCCCC#1"); }), ErrorCode::kSyntaxError);
    try {
      parse_smiles("CC)C");
      FAIL();
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::kSyntaxError);
      EXPECT_EQ(e.detail(), 2);
    }
    try {
      parse_smiles("CC[C");
      FAIL();
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::kSyntaxError);
      EXPECT_EQ(e.detail(), 4);
    }
  }

  TEST(ParseSmiles, Deterministic) {
    const char *s = "CC(C)Cc1ccc(cc1)[C@@H](C)C(=O)O";
    MoleculeGraph a = parse_smiles(s), b = parse_smiles(s);
    EXPECT_EQ(a.smiles_order(), b.smiles_order());
    EXPECT_EQ(a.atom_features(), b.atom_features());
    EXPECT_EQ(a.bond_features(), b.bond_features());
    ASSERT_EQ(a.num_bonds(), b.num_bonds());
    for (std::size_t i = 0; i < a.num_bonds(); ++i) {
      EXPECT_EQ(a.bond(i).begin, b.bond(i).begin);
      EXPECT_EQ(a.bond(i).end, b.bond(i).end);
    }
  }

  TEST(Featurize, MethaneCarbon) {
    const MoleculeGraph m = parse_smiles("C");
    const Matrix &f = m.atom_features();
    ASSERT_EQ(f.cols(), 39);
    EXPECT_EQ(f(0, 1), 1.0);   // element C
    EXPECT_EQ(f(0, 16), 1.0);  // degree 0
    EXPECT_EQ(f(0, 35), 1.0);  // four hydrogens
    EXPECT_EQ(f(0, 22), 0.0);
    EXPECT_EQ(f(0, 23), 0.0);
    EXPECT_EQ(f(0, 30), 0.0);
    EXPECT_EQ(f(0, 36), 0.0);
    EXPECT_EQ(f.sum(), 4.0);  // element, degree, hybridization, H count
  }

  TEST(Featurize, BenzeneBond) {
    const MoleculeGraph m = parse_smiles("c1ccccc1");
    const Matrix &f = m.bond_features();
    ASSERT_EQ(f.cols(), 10);
    for (Eigen::Index b = 0; b < f.rows(); ++b) {
      EXPECT_EQ(f(b, 3), 1.0);
      EXPECT_EQ(f(b, 4), 1.0);
      EXPECT_EQ(f(b, 5), 1.0);
      EXPECT_EQ(f(b, 6), 1.0);  // stereo NONE
      EXPECT_EQ(f.row(b).sum(), 4.0);
    }
  }

  TEST(Featurize, UnknownElementMapsToOther) {
    const MoleculeGraph m = parse_smiles("[Na+]");
    const Matrix &f = m.atom_features();
    EXPECT_EQ(f(0, 15), 1.0);
  }

  class DatasetTest: public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
      esol_ = new Dataset(read_dataset(fs::path(HAMFORGE_DATA_DIR) / "esol.csv"));
    }
    static void TearDownTestSuite() { delete esol_; }
    static Dataset *esol_;
  };
  Dataset *DatasetTest::esol_ = nullptr;

  TEST_F(DatasetTest, EsolRowCount) {
    EXPECT_EQ(esol_->records.size() + esol_->skipped, 1128);
    EXPECT_EQ(esol_->records.size(), 1128);
    EXPECT_EQ(esol_->target_names, (std::vector<std::string> { "logS" }));
  }

  // Every one-hot group of every atom vector sums to one; widths are fixed.
  TEST_F(DatasetTest, FeaturePartitionsOverCorpus) {
    for (const Record &r: esol_->records) {
      const Matrix &af = r.mol.atom_features();
      const Matrix &bf = r.mol.bond_features();
      ASSERT_EQ(af.cols(), 39);
      ASSERT_EQ(bf.cols(), 10);
      ASSERT_EQ(static_cast<std::size_t>(af.rows()), r.mol.num_atoms());
      ASSERT_EQ(static_cast<std::size_t>(bf.rows()), r.mol.num_bonds());
      for (Eigen::Index i = 0; i < af.rows(); ++i) {
        EXPECT_EQ(af.row(i).segment(0, 16).sum(), 1.0);
        EXPECT_EQ(af.row(i).segment(16, 6).sum(), 1.0);
        EXPECT_EQ(af.row(i).segment(24, 6).sum(), 1.0);
        EXPECT_EQ(af.row(i).segment(31, 5).sum(), 1.0);
        EXPECT_EQ(af.row(i).segment(37, 2).sum(), af(i, 36));
      }
      for (Eigen::Index b = 0; b < bf.rows(); ++b) {
        EXPECT_EQ(bf.row(b).segment(0, 4).sum(), 1.0);
        EXPECT_EQ(bf.row(b).segment(6, 4).sum(), 1.0);
      }
    }
  }

  TEST_F(DatasetTest, AdjacencyQueriesAgreeFromBothEnds) {
    for (const Record &r: esol_->records) {
      for (std::size_t b = 0; b < r.mol.num_bonds(); ++b) {
        const Bond &bond = r.mol.bond(b);
        ASSERT_EQ(r.mol.bond_between(bond.begin, bond.end), &bond);
        ASSERT_EQ(r.mol.bond_between(bond.end, bond.begin), &bond);
      }
    }
  }

  TEST(ReadDataset, SkipsBadSmiles) {
    auto p = temp_file("two.csv", "smiles,y\nCCO,1.5\nC1CC,2.0\n");
    Dataset ds = read_dataset(p);
    ASSERT_EQ(ds.records.size(), 1);
    EXPECT_EQ(ds.skipped, 1);
    EXPECT_EQ(ds.records[0].targets[0], 1.5);
  }

  TEST(ReadDataset, MaskedTarget) {
    auto p = temp_file("mask.csv", "smiles,a,b\nCCO,1.0,\nCC,,2\n");
    Dataset ds = read_dataset(p);
    ASSERT_EQ(ds.records.size(), 2);
    EXPECT_FALSE(ds.records[0].masked[0]);
    EXPECT_TRUE(ds.records[0].masked[1]);
    EXPECT_TRUE(ds.records[1].masked[0]);
    EXPECT_EQ(ds.records[1].targets[1], 2.0);
  }

  TEST(ReadDataset, Errors) {
    auto p = temp_file("bad_header.csv", "mol,y\nCC,1\n");
    EXPECT_EQ(code_of([&] { read_dataset(p); }), ErrorCode::kHeaderMismatch);
    EXPECT_EQ(code_of([] { read_dataset("/nonexistent/file.csv"); }), ErrorCode::kIoError);
  }

  TEST(Xyz, RoundTripAndComment) {
    XyzFrame f;
    f.elements = { "C", "O", "N" };
    f.comment = "  frame 0: energy=-1.5 ";
    f.coords.resize(3, 3);
    f.coords << 0.1234567891, -1.5, 2.0, 3.25, 0.0, -0.000001, 1e-3, 7.0, -8.5;
    auto p = fs::temp_directory_path() / "hamforge_rt.xyz";
    write_xyz(p, { f });
    auto frames = read_xyz(p);
    ASSERT_EQ(frames.size(), 1);
    EXPECT_EQ(frames[0].comment, f.comment);
    EXPECT_EQ(frames[0].elements, f.elements);
    EXPECT_LT((frames[0].coords - f.coords).cwiseAbs().maxCoeff(), 1e-6);
  }

  TEST(Xyz, CountMismatch) {
    EXPECT_EQ(code_of([] { parse_xyz("2\nc\nC 0 0 0\nC 1 0 0\nC 2 0 0\n"); }),
              ErrorCode::kCountMismatch);
    EXPECT_EQ(code_of([] { parse_xyz("3\nc\nC 0 0 0\nC 1 0 0\n"); }),
              ErrorCode::kCountMismatch);
    EXPECT_EQ(code_of([] { parse_xyz("2\nc\nC 0 0 zero\nC 1 0 0\n"); }),
              ErrorCode::kMalformedLine);
  }

  TEST(Xyz, MultiFrame) {
    auto frames = parse_xyz("1\na\nC 0 0 0\n1\nb\nC 1 2 3\n");
    ASSERT_EQ(frames.size(), 2);
    EXPECT_EQ(frames[1].comment, "b");
    EXPECT_EQ(frames[1].coords(0, 2), 3.0);
  }

  const char *kMethaneSdf = R"(methane
  test

  5  4  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291    0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291   -0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291    0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291   -0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
  1  4  1  0
  1  5  1  0
M  END
$$$$
)";

  const char *kWaterCationSdf = R"(ethanol-ish
  test

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    1.5000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    2.0000    1.2000    0.0000 O   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  2  3  1  0
M  CHG  1   3   1
M  END
$$$$
)";

  TEST(Sdf, SingleMethane) {
    auto mols = parse_sdf(kMethaneSdf);
    ASSERT_EQ(mols.size(), 1);
    EXPECT_EQ(mols[0].num_atoms(), 1);
    EXPECT_EQ(mols[0].atom(0).num_hydrogens, 4);
    ASSERT_TRUE(mols[0].reference_conformation().has_value());
    EXPECT_EQ(mols[0].reference_conformation()->rows(), 1);
  }

  TEST(Sdf, TwoRecordsAndCharges) {
    auto mols = parse_sdf(std::string(kMethaneSdf) + kWaterCationSdf);
    ASSERT_EQ(mols.size(), 2);
    EXPECT_EQ(mols[1].num_atoms(), 3);
    EXPECT_EQ(mols[1].atom(2).formal_charge, 1);
    EXPECT_EQ(mols[1].atom(0).num_hydrogens, 3);
    EXPECT_NEAR((*mols[1].reference_conformation())(2, 1), 1.2, 1e-12);
  }

  TEST(Sdf, MissingBondBlock) {
    const std::string single = "x\n\n\n  1  0  0  0  0  0  0  0  0  0999 V2000\n"
                               "    0.0000    0.0000    0.0000 O   0  0\nM  END\n$$$$\n";
    auto mols = parse_sdf(single);
    ASSERT_EQ(mols.size(), 1);
    EXPECT_EQ(mols[0].num_bonds(), 0);
    EXPECT_EQ(mols[0].atom(0).num_hydrogens, 2);

    const std::string two = "x\n\n\n  2  0  0  0  0  0  0  0  0  0999 V2000\n"
                            "    0.0000    0.0000    0.0000 O   0  0\n"
                            "    1.0000    0.0000    0.0000 O   0  0\nM  END\n$$$$\n";
    EXPECT_EQ(code_of([&] { parse_sdf(two); }), ErrorCode::kTruncatedRecord);

    const std::string short_bonds = "x\n\n\n  2  1  0  0  0  0  0  0  0  0999 V2000\n"
                                    "    0.0000    0.0000    0.0000 O   0  0\n"
                                    "    1.0000    0.0000    0.0000 O   0  0\nM  END\n$$$$\n";
    EXPECT_EQ(code_of([&] { parse_sdf(short_bonds); }), ErrorCode::kTruncatedRecord);
  }

  TEST(Sdf, AromaticOrderFour) {
    std::string s = "bz\n\n\n  6  6  0  0  0  0  0  0  0  0999 V2000\n";
    for (int i = 0; i < 6; ++i)
      s += fmt::format("{:10.4f}{:10.4f}{:10.4f} C   0  0\n", std::cos(i * M_PI / 3) * 1.39,
                       std::sin(i * M_PI / 3) * 1.39, 0.0);
    for (int i = 0; i < 6; ++i)
      s += fmt::format("{:3d}{:3d}  4  0\n", i + 1, (i + 1) % 6 + 1);
    s += "M  END\n$$$$\n";
    auto mols = parse_sdf(s);
    ASSERT_EQ(mols.size(), 1);
    for (const Bond &b: mols[0].bonds())
      EXPECT_EQ(b.order, BondOrder::kAromatic);
    for (const Atom &a: mols[0].atoms()) {
      EXPECT_TRUE(a.is_aromatic);
      EXPECT_EQ(a.num_hydrogens, 1);
    }
  }

  TEST(Sdf, V3000Rejected) {
    const std::string v3 = "x\n\n\n  0  0  0     0  0            999 V3000\nM  END\n$$$$\n";
    EXPECT_EQ(code_of([&] { parse_sdf(v3); }), ErrorCode::kUnsupportedVersion);
  }

  // Writing a conformation to XYZ and reading it back keeps every pairwise
  // distance; the QM9 fixture's SDF atoms line up with its SMILES.
  TEST(Sdf, FixtureMatchesSmilesAndRoundTrips) {
    const fs::path dir(HAMFORGE_DATA_DIR);
    Dataset ds = read_dataset(dir / "qm9_500.csv");
    auto mols = read_sdf(dir / "qm9_500.sdf");
    ASSERT_EQ(ds.records.size(), 500);
    ASSERT_EQ(mols.size(), 500);
    for (std::size_t k = 0; k < mols.size(); ++k) {
      MoleculeGraph m = ds.records[k].mol;
      ASSERT_TRUE(attach_conformation(m, mols[k])) << ds.records[k].smiles;
      EXPECT_EQ(m.num_bonds(), mols[k].num_bonds());
      for (std::size_t i = 0; i < m.num_atoms(); ++i)
        EXPECT_EQ(m.atom(i).num_hydrogens, mols[k].atom(i).num_hydrogens)
            << ds.records[k].smiles << " atom " << i;

      XyzFrame f;
      for (const Atom &a: m.atoms())
        f.elements.push_back(a.element);
      f.coords = *m.reference_conformation();
      auto back = parse_xyz(format_xyz({ f }));
      const Matrix &a = f.coords, &b = back[0].coords;
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.rows(); ++j)
          ASSERT_NEAR((a.row(i) - a.row(j)).norm(), (b.row(i) - b.row(j)).norm(), 1e-5);
    }
  }

  TEST(MoleculeGraph, PermutedKeepsSmilesAtoms) {
    MoleculeGraph m = parse_smiles("CCO");
    std::vector<std::size_t> perm = { 2, 0, 1 };
    MoleculeGraph p = m.permuted(perm);
    EXPECT_EQ(p.atom(0).element, "O");
    // the first SMILES atom (old 0) is now index 1
    EXPECT_EQ(p.smiles_order()[0], 1);
    EXPECT_NE(p.bond_between(0, 2), nullptr);
    EXPECT_EQ(p.bond_between(0, 1), nullptr);
  }

  TEST(MoleculeGraph, Masses) {
    Vector m = parse_smiles("CO").masses();
    EXPECT_NEAR(m[0], 12.011 / 50, 1e-12);
    EXPECT_NEAR(m[1], 15.999 / 50, 1e-12);
  }
}  // namespace
}  // namespace hamforge::chem
