#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the bundled datasets under data/.

Inputs are the public ESOL (Delaney) table and a 1k-molecule QM9 subset.
Reference conformations for the QM9 subset are embedded with RDKit
(ETKDGv3 followed by MMFF94 relaxation); they substitute for the DFT
geometries, which are not redistributed here. Hydrogens are written to
the SDF so heavy-atom hydrogen counts are explicit.

Usage: make_fixtures.py ESOL.csv micro_qm9.csv OUT_DIR
"""
import csv
import random
import sys

from rdkit import Chem
from rdkit.Chem import AllChem

QM9_TARGETS = ["mu", "alpha", "homo", "lumo", "gap", "r2", "zpve",
               "u0", "u298", "h298", "g298", "cv"]


def write_esol(src, out):
    with open(src) as f, open(out, "w", newline="") as g:
        w = csv.writer(g, lineterminator="\n")
        w.writerow(["smiles", "logS"])
        for row in csv.DictReader(f):
            w.writerow([row["smiles"],
                        row["measured log solubility in mols per litre"]])


def embed(smiles, seed):
    mol = Chem.MolFromSmiles(smiles)
    if mol is None:
        return None
    mol = Chem.AddHs(mol)
    params = AllChem.ETKDGv3()
    params.randomSeed = seed
    if AllChem.EmbedMolecule(mol, params) != 0:
        return None
    if AllChem.MMFFHasAllMoleculeParams(mol):
        AllChem.MMFFOptimizeMolecule(mol, maxIters=2000)
    return mol


def write_qm9(src, out_dir, count=500, seed=7):
    rows = list(csv.DictReader(open(src)))
    rows = [r for r in rows if Chem.MolFromSmiles(r["smiles"]) is not None
            and Chem.MolFromSmiles(r["smiles"]).GetNumAtoms() >= 3]
    random.Random(seed).shuffle(rows)
    kept = []
    writer = Chem.SDWriter(f"{out_dir}/qm9_500.sdf")
    for r in rows:
        mol = embed(r["smiles"], seed)
        if mol is None:
            continue
        mol.SetProp("_Name", r["mol_id"])
        writer.write(mol)
        kept.append(r)
        if len(kept) == count:
            break
    writer.close()
    with open(f"{out_dir}/qm9_500.csv", "w", newline="") as g:
        w = csv.writer(g, lineterminator="\n")
        w.writerow(["smiles"] + QM9_TARGETS)
        for r in kept:
            w.writerow([r["smiles"]] + [r[t] for t in QM9_TARGETS])


if __name__ == "__main__":
    esol, qm9, out = sys.argv[1:4]
    write_esol(esol, f"{out}/esol.csv")
    write_qm9(qm9, out)
