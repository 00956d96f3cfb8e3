"""SMILES writer and canonical atom ranking."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

from ..molgraph import BondOrder, Molecule, _refine, default_implicit_h
from .aromaticity import kekulize as _kekulize
from .aromaticity import normalize

__all__ = ["canonical_ranks", "write_smiles"]

_AROMATIC_SYMBOLS = {"B": "b", "C": "c", "N": "n", "O": "o", "P": "p", "S": "s", "Se": "se", "As": "as"}
_PLAIN_AROMATIC = frozenset("bcnops")


def canonical_ranks(mol: Molecule) -> list[int]:
    """Distinct canonical ranks 0..n-1, one per atom.

    Atom invariants are refined over neighbourhoods until the partition is
    stable; remaining ties are broken by individualizing the lowest-index
    atom of the first tied class and refining again.
    """
    n = len(mol.atoms)
    ring_atoms = mol.ring_atoms
    invariants = [
        (
            a.element,
            a.formal_charge,
            mol.degree(i),
            mol.total_h(i),
            a.aromatic,
            i in ring_atoms,
            a.isotope or 0,
        )
        for i, a in enumerate(mol.atoms)
    ]
    colors = _refine(invariants, mol.neighbor_orders)
    while len(set(colors)) < n:
        counts = Counter(colors)
        tied = min(c for c, k in counts.items() if k > 1)
        chosen = colors.index(tied)
        labels = [(c, int(c == tied and i != chosen)) for i, c in enumerate(colors)]
        colors = _refine(labels, mol.neighbor_orders)
    return colors


def _atom_text(mol: Molecule, i: int) -> str:
    atom = mol.atoms[i]
    symbol = _AROMATIC_SYMBOLS[atom.symbol] if atom.aromatic else atom.symbol
    h = mol.total_h(i) - sum(1 for j in mol.adjacency[i] if mol.atoms[j].element == 1)
    plain_h = default_implicit_h(mol, i)
    if plain_h is not None and plain_h == h and (not atom.aromatic or symbol in _PLAIN_AROMATIC):
        return symbol
    parts = ["[", str(atom.isotope) if atom.isotope else "", symbol]
    if h:
        parts.append("H" if h == 1 else f"H{h}")
    q = atom.formal_charge
    if q:
        sign = "+" if q > 0 else "-"
        parts.append(sign if abs(q) == 1 else f"{sign}{abs(q)}")
    parts.append("]")
    return "".join(parts)


def _bond_text(mol: Molecule, i: int, j: int) -> str:
    order = mol.bond_between(i, j).order
    both_aromatic = mol.atoms[i].aromatic and mol.atoms[j].aromatic
    if order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order is BondOrder.DOUBLE else "#"


def _ring_label(digit: int) -> str:
    return str(digit) if digit < 10 else f"%{digit:02d}"


def _write(mol: Molecule, priority: Sequence[int]) -> str:
    n = len(mol.atoms)
    key = priority.__getitem__
    nbrs = [sorted(mol.adjacency[i], key=key) for i in range(n)]
    visited = [False] * n
    children: list[list[int]] = [[] for _ in range(n)]
    closures: list[list[int]] = [[] for _ in range(n)]  # partner atoms, both ends
    roots = []

    for start in sorted(range(n), key=key):
        if visited[start]:
            continue
        roots.append(start)
        visited[start] = True
        stack = [(start, -1, iter(nbrs[start]))]
        on_path = {start}
        seen_edges = set()
        while stack:
            u, parent, it = stack[-1]
            v = next(it, None)
            if v is None:
                stack.pop()
                on_path.discard(u)
                continue
            if v == parent or (min(u, v), max(u, v)) in seen_edges:
                continue
            seen_edges.add((min(u, v), max(u, v)))
            if visited[v]:
                closures[v].append(u)
                closures[u].append(v)
            else:
                visited[v] = True
                children[u].append(v)
                stack.append((v, u, iter(nbrs[v])))
                on_path.add(v)

    out: list[str] = []
    open_digits: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()
    emitted = [False] * n

    def emit(u: int) -> None:
        emitted[u] = True
        out.append(_atom_text(mol, u))
        released = []
        for v in sorted(closures[u], key=key):
            edge = (min(u, v), max(u, v))
            if emitted[v]:
                digit = open_digits.pop(edge)
                released.append(digit)
                out.append(_ring_label(digit))
            else:
                digit = next(d for d in range(1, 100) if d not in in_use)
                in_use.add(digit)
                open_digits[edge] = digit
                out.append(_bond_text(mol, u, v) + _ring_label(digit))
        in_use.difference_update(released)
        kids = children[u]
        for k, v in enumerate(kids):
            text = _bond_text(mol, u, v)
            if k < len(kids) - 1:
                out.append("(" + text)
                emit(v)
                out.append(")")
            else:
                out.append(text)
                emit(v)

    for r, root in enumerate(roots):
        if r:
            out.append(".")
        emit(root)
    return "".join(out)


def write_smiles(mol: Molecule, canonical: bool = False, kekulize: bool = False) -> str:
    """Write a SMILES string for ``mol``.

    Canonical output re-derives aromaticity and orders atoms by
    :func:`canonical_ranks`, so isomorphic inputs produce identical strings.
    With ``kekulize`` aromatic systems are written with explicit single and
    double bonds; :class:`KekulizeError` is raised when that is impossible.
    """
    if canonical:
        mol = normalize(mol)
    if kekulize:
        mol = _kekulize(mol)
    priority = canonical_ranks(mol) if canonical else list(range(len(mol.atoms)))
    return _write(mol, priority)
