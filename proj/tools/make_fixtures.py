#!/usr/bin/env python3
#
# Project ringkit - Copyright 2026 ringkit authors.
# SPDX-License-Identifier: Apache-2.0
#
"""Regenerates the committed test fixtures under tests/data.

Requires RDKit. The outputs are committed, so this only needs to run when a
fixture changes; the C++ test suite never calls it.
"""

import argparse
import csv
import pathlib
import random

from rdkit import Chem

# Two-point building blocks for oligomer-style molecules. {L} and {R} become
# the attachment points.
UNITS = [
    "{L}c1ccc({R})s1",
    "{L}c1sc({R})cc1CCCCCC",
    "{L}c1sc({R})cc1CCCC",
    "{L}c1ccc({R})o1",
    "{L}c1ccc({R})[se]1",
    "{L}c1ccc({R})[te]1",
    "{L}c1ccc({R})cc1",
    "{L}c1ccc({R})c2nsnc12",
    "{L}c1cc2sc({R})cc2s1",
    "{L}c1ccc2c(c1)C(CC)(CC)c1cc({R})ccc1-2",
    "{L}c1ccc2c(c1)c1cc({R})ccc1n2CCCC",
    "{L}c1cc2[Si](CC)(CC)c3cc({R})sc3-c2s1",
    "{L}c1cc2[Ge](C)(C)c3cc({R})sc3-c2s1",
    "{L}C=C{R}",
    "{L}C#C{R}",
    "{L}c1ccc(s1)C1=C2C(=O)N(CC)C(c3ccc({R})s3)=C2C(=O)N1CC",
    "{L}c1cc2c(s1)-c1sc({R})cc1C2(CC)CC",
    "{L}c1cc2c(OC)c3cc({R})sc3c(OC)c2s1",
    "{L}c1ccc({R})nc1",
    "{L}c1ccc({R})c2c1[nH]c1ccccc12",
    "{L}c1ccc2cc({R})ccc2c1",
]

END_GROUPS = [
    "{L}[H]",
    "{L}C",
    "{L}CCCCCC",
    "{L}C=O",
    "{L}C=C(C#N)C#N",
    "{L}N(C)C",
    "{L}OC",
    "{L}F",
    "{L}Cl",
    "{L}Br",
    "{L}[Sn](C)(C)C",
    "{L}B(O)O",
    "{L}c1ccccc1",
    "{L}C=C1C(=O)c2ccccc2C1=C(C#N)C#N",
    "{L}N(c1ccccc1)c1ccccc1",
    "{L}[N+](=O)[O-]",
    "{L}S(=O)(=O)C",
    "{L}P(C)C",
    "{L}I",
    "{L}C(F)(F)F",
]

# Drug-like and small OSC motifs; smaller molecules keep the reference table
# covering the parser's grammar rather than just big oligomers.
DRUG_LIKE = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "c1ccc2c(c1)ccc1ccccc12",
    "c1ccc2cc3ccccc3cc2c1",
    "c1cc2ccc3cccc4ccc(c1)c2c34",
    "C1CCC2(CC1)CCCC2",
    "C1CC2CCC1C2",
    "C1CC2CCC1CC2",
    "C1C2CC3CC1CC(C2)C3",
    "C12C3C4C1C5C2C3C45",
    "OC(=O)C1=CC=CC=C1",
    "Nc1ccc(cc1)S(=O)(=O)Nc1ncccn1",
    "COc1ccc2[nH]cc(CCN(C)C)c2c1",
    "O=C1NC(=O)c2ccccc12",
    "c1ccc(cc1)-c1ccccc1",
    "c1ccc(cc1)-c1ccc(cc1)-c1ccccc1",
    "c1csc(c1)-c1cccs1",
    "c1csc(c1)-c1ccc(s1)-c1cccs1",
    "Cc1ccc(C)s1",
    "FC(F)(F)c1ccc(Cl)cc1Br",
    "C#CC1=CC=CC=C1",
    "N#Cc1ccccc1C#N",
    "C[Si](C)(C)C#C",
    "C[Se]C",
    "c1cc[se]c1",
    "c1cc[te]c1",
    "C[Ge](C)(C)C",
    "C[Sn](C)(C)C",
    "OB(O)c1ccccc1",
    "CP(C)(C)=O",
    "CCP(CC)CC",
    "C[N+](C)(C)C",
    "[O-][N+](=O)c1ccccc1",
    "CS(C)=O",
    "CS(=O)(=O)C",
    "OS(=O)(=O)O",
    "ICCI",
    "C1=CC=CN=C1",
    "c1ccncc1",
    "c1cnc2ncncc2n1",
    "c1ccc2[nH]ccc2c1",
    "c1ccc2c(c1)[nH]c1ccccc12",
    "c1ccc2c(c1)oc1ccccc12",
    "c1ccc2c(c1)sc1ccccc12",
    "c1ccc2c(c1)Cc1ccccc1-2",
    "C1CCC(CC1)C1CCCCC1",
    "C1CC1",
    "C1CCC1",
    "C1=CC1",
    "CC1(C)CC1",
    "C1CCCCCCCCCCC1",
    "O=C1CCCCC1",
    "N1CCOCC1",
    "C1COCCO1",
    "c1ccc2nsnc2c1",
    "CCCCCCCCCCCCCCCC",
    "CC(C)(C)c1ccc(O)cc1",
    "OCC(O)CO",
    "CC=CC=CC=C",
    "C=CC#N",
    "CC#CC",
    "[2H]C([2H])([2H])O",
    "C[C@H](N)C(=O)O",
    "F/C=C/F",
    "O=C(O)C%10CCCCC%10",
]


def attach(template, left, right):
    text = template.replace("{L}", left)
    return text.replace("{R}", right)


def zip_fragments(parts):
    """parts: list of SMILES with [*:n] dummies; joins matching map numbers."""
    mol = Chem.MolFromSmiles(parts[0])
    for extra in parts[1:]:
        mol = Chem.CombineMols(mol, Chem.MolFromSmiles(extra))
    return Chem.molzip(mol)


def oligomer(rng, n_units):
    parts = []
    tag = 1
    left_cap = rng.choice(END_GROUPS)
    parts.append(attach(left_cap, f"[*:{tag}]", ""))
    for _ in range(n_units):
        unit = rng.choice(UNITS)
        parts.append(attach(unit, f"[*:{tag}]", f"[*:{tag + 1}]"))
        tag += 1
    right_cap = rng.choice(END_GROUPS)
    parts.append(attach(right_cap, f"[*:{tag}]", ""))
    mol = zip_fragments(parts)
    Chem.SanitizeMol(mol)
    mol = Chem.RemoveHs(mol)
    return Chem.MolToSmiles(mol)


def synthetic_pce(mol, rng):
    ri = mol.GetRingInfo()
    n_rings = ri.NumRings()
    n_arom = sum(1 for r in ri.AtomRings()
                 if all(mol.GetAtomWithIdx(i).GetIsAromatic() for i in r))
    n_s = sum(1 for a in mol.GetAtoms() if a.GetSymbol() in ("S", "Se", "Te"))
    n_heavy = mol.GetNumAtoms()
    n_ring_atoms = sum(1 for a in mol.GetAtoms() if a.IsInRing())
    n_n = sum(1 for a in mol.GetAtoms() if a.GetSymbol() == "N")
    value = (0.45 * n_arom + 0.25 * (n_rings - n_arom) + 0.30 * n_s
             + 0.15 * n_n - 0.04 * (n_heavy - n_ring_atoms))
    return round(value + rng.gauss(0.0, 0.15), 4)


def counts(smiles):
    mol = Chem.MolFromSmiles(smiles)
    total_h = sum(a.GetTotalNumHs() for a in mol.GetAtoms())
    return mol.GetNumAtoms(), mol.GetNumBonds(), total_h


def generate_corpus(rng, n, unit_range, max_heavy):
    seen = set()
    out = []
    while len(out) < n:
        smi = oligomer(rng, rng.randint(*unit_range))
        mol = Chem.MolFromSmiles(smi)
        if mol is None or smi in seen or mol.GetNumAtoms() > max_heavy:
            continue
        if any(a.GetChiralTag() != Chem.ChiralType.CHI_UNSPECIFIED
               for a in mol.GetAtoms()):
            continue
        seen.add(smi)
        out.append(smi)
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(
        pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240611)

    # Reference atom/bond/hydrogen counts.
    osc = generate_corpus(rng, 60, (1, 4), 80)
    with open(out / "reference_counts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "heavy_atoms", "bonds", "total_h"])
        for smi in DRUG_LIKE + osc:
            w.writerow([smi, *counts(smi)])

    # Capacity fixture: small distinct molecules with random targets.
    small = generate_corpus(rng, 32, (1, 2), 28)
    with open(out / "overfit32.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "y"])
        for smi in small:
            w.writerow([smi, round(rng.uniform(0.0, 10.0), 4)])

    # HOPV-sized surrogate with a structure-derived synthetic PCE.
    hopv = generate_corpus(rng, 350, (2, 5), 70)
    with open(out / "hopv_surrogate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "pce"])
        for smi in hopv:
            w.writerow([smi, synthetic_pce(Chem.MolFromSmiles(smi), rng)])


if __name__ == "__main__":
    main()
