"""Randomized prediction fixtures with the truth injected at a known rank."""

from __future__ import annotations

import random
from dataclasses import dataclass

from fp2mol.fingerprint import morgan_fingerprint, tanimoto
from fp2mol.mces import mces_oracle
from fp2mol.smiles import SmilesError, canonical_smiles, parse_smiles, write_smiles

from molgen import build_molecule

INVALID = ("C1CC", "C(C", "Xx", "c1cc1", "C%", "")


@dataclass(frozen=True)
class Fixture:
    truth: str
    candidates: tuple[str, ...]
    truth_rank: int | None  # 1-based, None when absent


def random_fixture(rng: random.Random, max_candidates: int = 12, max_atoms: int = 7) -> Fixture:
    truth = write_smiles(build_molecule(rng, max_atoms=max_atoms), canonical=False)
    n = rng.randint(0, max_candidates)
    cands = []
    for _ in range(n):
        if rng.random() < 0.2:
            cands.append(rng.choice(INVALID))
        else:
            cands.append(write_smiles(build_molecule(rng, max_atoms=max_atoms), canonical=False))
    rank = None
    if rng.random() < 0.5:
        rank = rng.randint(1, n + 1)
        cands.insert(rank - 1, truth)
    return Fixture(truth, tuple(cands), rank)


def _parsed_window(cands, k):
    out = []
    for s in cands[:k]:
        try:
            out.append(parse_smiles(s))
        except (SmilesError, ValueError):
            pass
    return out


def expected_values(cands, truth_smiles, k):
    """Independent recomputation: canonical keys, exhaustive MCES, direct Tanimoto."""
    truth = parse_smiles(truth_smiles)
    window = _parsed_window(cands, k)
    key = canonical_smiles(truth_smiles)
    hit = any(canonical_smiles(s) == key for s in cands[:k])
    dists = [mces_oracle(truth, m).distance for m in window]
    ref = morgan_fingerprint(truth)
    sims = [tanimoto(ref, morgan_fingerprint(m)) for m in window]
    return hit, (min(dists) if dists else 100.0), (max(sims) if sims else 0.0)
