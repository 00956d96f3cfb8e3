"""Walk through parsing, canonical SMILES, fingerprints and MCES on a few drugs.

Run with ``python3 demos/structures_and_fingerprints.py``.
"""

from __future__ import annotations

from fp2mol.fingerprint import fingerprint_to_onbits, morgan_fingerprint, tanimoto
from fp2mol.mces import mces_distance
from fp2mol.smiles import parse_smiles, tokenize_smiles, write_smiles

DRUGS = {
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "aspirin, Kekulé and reordered": "OC(=O)C1=CC=CC=C1OC(C)=O",
    "paracetamol": "CC(=O)Nc1ccc(O)cc1",
    "phenacetin": "CCOc1ccc(NC(C)=O)cc1",
}


def main() -> None:
    mols = {name: parse_smiles(s) for name, s in DRUGS.items()}

    print("canonical forms (two spellings of aspirin collapse to one string):")
    for name, mol in mols.items():
        print(f"  {name:32s} {write_smiles(mol, canonical=True)}")

    print("\ndecoder tokens for paracetamol:")
    print("  " + " ".join(tokenize_smiles(write_smiles(mols["paracetamol"], canonical=True))))

    fps = {name: morgan_fingerprint(mol) for name, mol in mols.items()}
    print("\nradius-2, 4096-bit fingerprints:")
    for name, fp in fps.items():
        print(f"  {name:32s} {len(fingerprint_to_onbits(fp)):3d} on-bits")

    print("\npairwise Tanimoto similarity and MCES distance against paracetamol:")
    ref = mols["paracetamol"]
    for name, mol in mols.items():
        result = mces_distance(ref, mol)
        flag = "" if result.exact else " (bound only)"
        print(f"  {name:32s} tanimoto {tanimoto(fps['paracetamol'], fps[name]):.3f}  mces {result.distance}{flag}")


if __name__ == "__main__":
    main()
