"""Kekulization and aromaticity perception."""

from __future__ import annotations

from dataclasses import replace
from itertools import combinations

import networkx as nx

from ..molgraph import AROMATIC_ELEMENTS, Atom, Bond, BondOrder, Molecule, allowed_valences

__all__ = ["KekulizeError", "kekulize", "perceive_aromaticity", "normalize"]

_ELECTRONEGATIVE = frozenset({7, 8, 16})


class KekulizeError(ValueError):
    pass


def _freeze_hydrogens(old: Molecule, atoms: list[Atom], bonds: list[Bond]) -> Molecule:
    """Build a molecule whose per-atom H totals match ``old`` exactly."""
    mol = old.derive(atoms, bonds)
    fixed = list(atoms)
    changed = False
    for i in range(len(atoms)):
        if mol.total_h(i) != old.total_h(i):
            h_atoms = sum(1 for j in old.adjacency[i] if old.atoms[j].element == 1)
            fixed[i] = replace(atoms[i], explicit_h=old.total_h(i) - h_atoms, bracket=True)
            changed = True
    return old.derive(fixed, bonds) if changed else mol


def _needs_double_bond(mol: Molecule, i: int) -> bool:
    atom = mol.atoms[i]
    valences = allowed_valences(atom.element, atom.formal_charge)
    if valences is None:
        return False
    used = mol.total_h(i)
    for order, _ in mol.neighbor_orders[i]:
        used += 1 if order == BondOrder.AROMATIC else order
    return valences[0] - used >= 1


def _perfect_matching(partners: dict[int, list[int]], max_steps: int = 20000) -> set[frozenset[int]] | None:
    """Pair every key with one neighbour; None when impossible.

    Backtracking that always extends the most constrained atom first, which
    resolves ordinary ring systems without any backtracking at all. A
    blossom-based maximum matching takes over if the step budget runs out.
    """
    mate: dict[int, int] = {}
    steps = 0

    def solve() -> bool:
        nonlocal steps
        steps += 1
        if steps > max_steps:
            raise TimeoutError
        best, best_opts = None, None
        for u, nb in partners.items():
            if u in mate:
                continue
            opts = [v for v in nb if v not in mate]
            if best_opts is None or len(opts) < len(best_opts):
                best, best_opts = u, opts
                if len(opts) <= 1:
                    break
        if best is None:
            return True
        for v in best_opts:
            mate[best], mate[v] = v, best
            if solve():
                return True
            del mate[best], mate[v]
        return False

    try:
        ok = solve()
    except TimeoutError:
        graph = nx.Graph()
        graph.add_nodes_from(partners)
        graph.add_edges_from((u, v) for u, nb in partners.items() for v in nb)
        pairs = nx.max_weight_matching(graph, maxcardinality=True)
        if 2 * len(pairs) != len(partners):
            return None
        return {frozenset(e) for e in pairs}
    if not ok:
        return None
    return {frozenset((u, v)) for u, v in mate.items()}


def kekulize(mol: Molecule) -> Molecule:
    """Replace aromatic bonds by an alternating single/double assignment.

    Atoms that still have a free valence take part in a maximum matching over
    the aromatic bonds; every such atom must be matched. Hydrogen counts are
    preserved.
    """
    aromatic_atoms = [i for i, a in enumerate(mol.atoms) if a.aromatic]
    aromatic_bonds = [k for k, b in enumerate(mol.bonds) if b.order is BondOrder.AROMATIC]
    if not aromatic_atoms and not aromatic_bonds:
        return mol
    for i in aromatic_atoms:
        if i not in mol.ring_atoms:
            raise KekulizeError(f"aromatic atom {i} is not in a ring")
    for k in aromatic_bonds:
        if k not in mol.ring_bonds:
            b = mol.bonds[k]
            raise KekulizeError(f"aromatic bond {b.begin}-{b.end} is not in a ring")

    needy = {i for i in aromatic_atoms if _needs_double_bond(mol, i)}
    partners: dict[int, list[int]] = {i: [] for i in sorted(needy)}
    for k in aromatic_bonds:
        b = mol.bonds[k]
        if b.begin in needy and b.end in needy:
            partners[b.begin].append(b.end)
            partners[b.end].append(b.begin)
    matched = _perfect_matching(partners)
    if matched is None:
        raise KekulizeError("no alternating single/double bond assignment exists")

    bonds = []
    for b in mol.bonds:
        if b.order is BondOrder.AROMATIC:
            order = BondOrder.DOUBLE if frozenset((b.begin, b.end)) in matched else BondOrder.SINGLE
            b = Bond(b.begin, b.end, order)
        bonds.append(b)
    atoms = [replace(a, aromatic=False) if a.aromatic else a for a in mol.atoms]
    return _freeze_hydrogens(mol, atoms, bonds)


def _pi_electrons(mol: Molecule, i: int) -> int | None:
    """Electrons atom i donates to a ring's pi system, or None if it cannot take part."""
    atom = mol.atoms[i]
    if atom.element not in AROMATIC_ELEMENTS:
        return None
    multiple = [b for b in mol.incident_bonds(i) if b.order in (BondOrder.DOUBLE, BondOrder.TRIPLE)]
    connections = mol.degree(i) + mol.total_h(i)
    charge = atom.formal_charge
    if multiple:
        if len(multiple) > 1 or multiple[0].order is BondOrder.TRIPLE:
            return None
        bond = multiple[0]
        if mol.bond_index(bond.begin, bond.end) in mol.ring_bonds:
            return 1
        partner = mol.atoms[bond.other(i)]
        if atom.element == 6 and partner.element in _ELECTRONEGATIVE:
            return 0
        return None
    if atom.element == 6:
        return {-1: 2, 1: 0}.get(charge)
    if atom.element in (7, 15, 33):
        if (charge == 0 and connections == 3) or (charge == -1 and connections == 2):
            return 2
        return None
    if atom.element in (8, 16, 34):
        return 2 if charge == 0 and connections == 2 else None
    if atom.element == 5:
        return 0 if charge == 0 and connections == 3 else None
    return None


def perceive_aromaticity(mol: Molecule) -> Molecule:
    """Mark rings satisfying the 4n+2 rule (singly, or as fused pairs) aromatic.

    Expects a molecule without aromatic flags; run :func:`kekulize` first.
    """
    rings = mol.rings
    if not rings:
        return mol
    electrons = {i: _pi_electrons(mol, i) for i in mol.ring_atoms}

    def huckel(atoms: set[int]) -> bool:
        counts = [electrons[i] for i in atoms]
        return None not in counts and sum(counts) % 4 == 2

    ring_bond_sets = []
    for ring in rings:
        ring_bond_sets.append({mol.bond_index(a, b) for a, b in zip(ring, ring[1:] + ring[:1])})
    aromatic = [huckel(set(ring)) for ring in rings]
    for x, y in combinations(range(len(rings)), 2):
        if aromatic[x] and aromatic[y]:
            continue
        if not ring_bond_sets[x] & ring_bond_sets[y]:
            continue
        envelope = set(rings[x]) | set(rings[y])
        if huckel(envelope):
            aromatic[x] = aromatic[y] = True

    arom_bonds: set[int] = set()
    arom_atoms: set[int] = set()
    for flag, ring, bset in zip(aromatic, rings, ring_bond_sets):
        if flag:
            arom_bonds |= bset
            arom_atoms |= set(ring)
    if not arom_atoms:
        return mol
    atoms = [replace(a, aromatic=True) if i in arom_atoms else a for i, a in enumerate(mol.atoms)]
    bonds = [
        Bond(b.begin, b.end, BondOrder.AROMATIC) if k in arom_bonds else b
        for k, b in enumerate(mol.bonds)
    ]
    return _freeze_hydrogens(mol, atoms, bonds)


def normalize(mol: Molecule) -> Molecule:
    """Re-derive aromaticity from a Kekulé form; leave unkekulizable input as is."""
    if mol.normalized:
        return mol
    try:
        out = perceive_aromaticity(kekulize(mol))
    except KekulizeError:
        out = mol
    out.normalized = True
    return out
