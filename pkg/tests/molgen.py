"""Random small molecules and corpus access shared by the tests."""

from __future__ import annotations

import random
from functools import lru_cache
from importlib.resources import files

from hypothesis import strategies as st

from fp2mol.molgraph import Atom, Bond, BondOrder, Molecule
from fp2mol.smiles import CorpusEntry, parse_smiles, read_corpus, write_smiles

# element, capacity at its default valence
_PALETTE = ((6, 4), (6, 4), (6, 4), (6, 4), (7, 3), (7, 3), (8, 2), (16, 2), (9, 1), (17, 1))


@lru_cache(maxsize=1)
def corpus() -> tuple[CorpusEntry, ...]:
    text = files("fp2mol").joinpath("data/druglike.smi").read_text(encoding="utf-8")
    return tuple(read_corpus(text.splitlines()))


def build_molecule(rng: random.Random, max_atoms: int = 8, extra_edges: int = 2, max_bonds: int | None = None) -> Molecule:
    """Random connected-ish heavy-atom graph respecting default valences.

    The result goes through SMILES writing and parsing, so aromatic rings are
    perceived exactly as they would be for user input.
    """
    n = rng.randint(1, max_atoms)
    picks = [rng.choice(_PALETTE) for _ in range(n)]
    free = [cap for _, cap in picks]
    edges: dict[tuple[int, int], int] = {}

    def room() -> bool:
        return max_bonds is None or len(edges) < max_bonds

    for i in range(1, n):
        parents = [j for j in range(i) if free[j] > 0]
        if parents and free[i] > 0 and room():
            j = rng.choice(parents)
            edges[(j, i)] = 1
            free[i] -= 1
            free[j] -= 1
    for _ in range(extra_edges):
        if n < 3 or not room():
            break
        i, j = sorted(rng.sample(range(n), 2))
        if (i, j) not in edges and free[i] > 0 and free[j] > 0:
            edges[(i, j)] = 1
            free[i] -= 1
            free[j] -= 1
    for key in list(edges):
        i, j = key
        bump = rng.choice((0, 0, 1, 2))
        bump = min(bump, free[i], free[j])
        if bump:
            edges[key] += bump
            free[i] -= bump
            free[j] -= bump
    mol = Molecule(
        [Atom(el) for el, _ in picks],
        [Bond(i, j, BondOrder(o)) for (i, j), o in sorted(edges.items())],
    )
    return parse_smiles(write_smiles(mol))


@st.composite
def molecules(draw, max_atoms: int = 8, extra_edges: int = 2) -> Molecule:
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return build_molecule(random.Random(seed), max_atoms, extra_edges)


@lru_cache(maxsize=1)
def corpus_molecules() -> tuple[tuple[str, str, Molecule], ...]:
    return tuple((e.id, e.smiles, parse_smiles(e.smiles)) for e in corpus())


def shuffled(mol: Molecule, rng: random.Random) -> list[int]:
    order = list(range(len(mol.atoms)))
    rng.shuffle(order)
    return order
