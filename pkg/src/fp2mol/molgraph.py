"""Attributed molecular graphs.

Atoms and bonds are small frozen records; :class:`Molecule` bundles them with
derived adjacency, implicit-hydrogen counts and ring information. Molecules
are never mutated after construction: every transformation (kekulization,
aromaticity perception, hydrogen folding, permutation) builds a new one.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

__all__ = [
    "SYMBOLS",
    "ATOMIC_NUMBER",
    "ORGANIC_SUBSET",
    "AROMATIC_ELEMENTS",
    "BondOrder",
    "Atom",
    "Bond",
    "Molecule",
    "MoleculeError",
    "allowed_valences",
    "default_implicit_h",
    "implicit_hydrogens",
    "perceive_rings",
    "graphs_isomorphic",
    "heavy_atom_count",
    "permute_atoms",
    "fold_hydrogens",
    "heavy_atom_graph",
]

SYMBOLS: tuple[str, ...] = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
ATOMIC_NUMBER: dict[str, int] = {s: i + 1 for i, s in enumerate(SYMBOLS)}

# B C N O P S F Cl Br I
ORGANIC_SUBSET = frozenset({5, 6, 7, 8, 9, 15, 16, 17, 35, 53})
# B C N O P S Se As
AROMATIC_ELEMENTS = frozenset({5, 6, 7, 8, 15, 16, 34, 33})

# Neutral-atom valence lists, smallest first.
_VALENCES: dict[int, tuple[int, ...]] = {
    1: (1,), 2: (0,), 10: (0,), 18: (0,), 36: (0,), 54: (0,),
    5: (3,), 6: (4,), 7: (3,), 8: (2,), 9: (1,),
    13: (3,), 14: (4,), 15: (3, 5), 16: (2, 4, 6), 17: (1,),
    32: (4,), 33: (3, 5), 34: (2, 4, 6), 35: (1,), 53: (1, 3, 5),
}


class MoleculeError(ValueError):
    """Raised when atoms or bonds violate the graph invariants."""


class BondOrder(enum.IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> float:
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


@dataclass(frozen=True)
class Atom:
    """A heavy atom (or explicit hydrogen) in a molecular graph.

    ``bracket`` marks atoms whose hydrogen count is fully given by
    ``explicit_h``; unbracketed organic-subset atoms additionally receive
    implicit hydrogens up to their default valence.
    """

    element: int
    formal_charge: int = 0
    explicit_h: int = 0
    aromatic: bool = False
    isotope: int | None = None
    bracket: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.element <= len(SYMBOLS):
            raise MoleculeError(f"unknown atomic number {self.element}")
        if self.explicit_h < 0:
            raise MoleculeError("explicit_h must be non-negative")
        if self.aromatic and self.element not in AROMATIC_ELEMENTS:
            raise MoleculeError(f"{self.symbol} cannot be aromatic")
        if self.isotope is not None and self.isotope <= 0:
            raise MoleculeError("isotope must be a positive mass number")

    @property
    def symbol(self) -> str:
        return SYMBOLS[self.element - 1]

    @property
    def fills_implicit_h(self) -> bool:
        return not self.bracket and self.element in ORGANIC_SUBSET


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder = BondOrder.SINGLE

    def __post_init__(self) -> None:
        if self.begin == self.end:
            raise MoleculeError(f"self-loop on atom {self.begin}")
        if self.begin > self.end:
            a, b = self.end, self.begin
            object.__setattr__(self, "begin", a)
            object.__setattr__(self, "end", b)
        object.__setattr__(self, "order", BondOrder(self.order))

    def other(self, atom: int) -> int:
        return self.end if atom == self.begin else self.begin


def allowed_valences(element: int, charge: int = 0) -> tuple[int, ...] | None:
    """Valences for an element, shifted to its isoelectronic neighbour when charged.

    N+ behaves like C, O- like F, and so on. Returns None for elements with
    no tabulated valence.
    """
    return _VALENCES.get(element - charge)


class Molecule:
    """Immutable attributed graph G = (V, E) of atoms and bonds."""

    __slots__ = ("atoms", "bonds", "adjacency", "_bond_index", "__dict__")

    def __init__(self, atoms: Iterable[Atom] = (), bonds: Iterable[Bond] = ()):
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        self.bonds: tuple[Bond, ...] = tuple(bonds)
        n = len(self.atoms)
        index: dict[tuple[int, int], int] = {}
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for k, bond in enumerate(self.bonds):
            if bond.end >= n or bond.begin < 0:
                raise MoleculeError(f"bond {bond.begin}-{bond.end} outside {n} atoms")
            key = (bond.begin, bond.end)
            if key in index:
                raise MoleculeError(f"duplicate bond {bond.begin}-{bond.end}")
            index[key] = k
            nbrs[bond.begin].append(bond.end)
            nbrs[bond.end].append(bond.begin)
        self._bond_index = index
        # set by smiles.normalize; the aromaticity model is then settled
        self.normalized = False
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(x)) for x in nbrs)

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"Molecule(atoms={len(self.atoms)}, bonds={len(self.bonds)})"

    def bond_between(self, i: int, j: int) -> Bond | None:
        k = self._bond_index.get((i, j) if i < j else (j, i))
        return None if k is None else self.bonds[k]

    def bond_index(self, i: int, j: int) -> int | None:
        return self._bond_index.get((i, j) if i < j else (j, i))

    def incident_bonds(self, i: int) -> list[Bond]:
        return [self.bonds[self.bond_index(i, j)] for j in self.adjacency[i]]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @cached_property
    def _hydrogens(self) -> tuple[tuple[int, ...], bool]:
        counts = []
        invalid = False
        for i in range(len(self.atoms)):
            h, ok = _implicit_h(self, i)
            counts.append(h)
            invalid |= not ok
        return tuple(counts), invalid

    @property
    def implicit_h(self) -> tuple[int, ...]:
        return self._hydrogens[0]

    @property
    def valence_invalid(self) -> bool:
        return self._hydrogens[1]

    @cached_property
    def hydrogen_counts(self) -> tuple[int, ...]:
        implicit = self.implicit_h
        return tuple(
            a.explicit_h + implicit[i] + sum(1 for j in self.adjacency[i] if self.atoms[j].element == 1)
            for i, a in enumerate(self.atoms)
        )

    def total_h(self, i: int) -> int:
        """Hydrogens on atom i: explicit, implicit and neighbouring H atoms."""
        return self.hydrogen_counts[i]

    @cached_property
    def neighbor_orders(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom, (bond order, neighbour) pairs."""
        out: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            out[b.begin].append((int(b.order), b.end))
            out[b.end].append((int(b.order), b.begin))
        return tuple(tuple(x) for x in out)

    @cached_property
    def rings(self) -> tuple[tuple[int, ...], ...]:
        return tuple(perceive_rings(self))

    @cached_property
    def ring_bonds(self) -> frozenset[int]:
        """Bonds on some cycle, i.e. every bond that is not a bridge."""
        bridges = _bridges(self)
        return frozenset(k for k in range(len(self.bonds)) if k not in bridges)

    @cached_property
    def ring_atoms(self) -> frozenset[int]:
        return frozenset(x for k in self.ring_bonds for x in (self.bonds[k].begin, self.bonds[k].end))

    def components(self) -> list[list[int]]:
        seen = [False] * len(self.atoms)
        comps = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            seen[start] = True
            comp, stack = [], [start]
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def derive(self, atoms: Sequence[Atom] | None = None, bonds: Sequence[Bond] | None = None) -> Molecule:
        """New molecule with replaced atoms and/or bond orders.

        Ring perception is reused when the bond topology is unchanged.
        """
        mol = Molecule(self.atoms if atoms is None else atoms, self.bonds if bonds is None else bonds)
        same = len(mol.bonds) == len(self.bonds) and all(
            (x.begin, x.end) == (y.begin, y.end) for x, y in zip(mol.bonds, self.bonds)
        )
        if same and len(mol.atoms) == len(self.atoms):
            for name in ("rings", "ring_atoms", "ring_bonds"):
                if name in self.__dict__:
                    mol.__dict__[name] = self.__dict__[name]
        return mol


def _bridges(mol: Molecule) -> set[int]:
    """Indices of bridge bonds (iterative Tarjan low-link)."""
    n = len(mol.atoms)
    disc = [-1] * n
    low = [0] * n
    out: set[int] = set()
    clock = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = clock
        clock += 1
        stack = [(root, -1, iter(mol.adjacency[root]))]
        while stack:
            u, via, it = stack[-1]
            v = next(it, None)
            if v is None:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        out.add(via)
                continue
            k = mol.bond_index(u, v)
            if k == via:
                continue
            if disc[v] < 0:
                disc[v] = low[v] = clock
                clock += 1
                stack.append((v, k, iter(mol.adjacency[v])))
            else:
                low[u] = min(low[u], disc[v])
    return out


def _bond_sums(mol: Molecule, i: int) -> tuple[int, int]:
    n_arom = other = 0
    for order, _ in mol.neighbor_orders[i]:
        if order == 4:
            n_arom += 1
        else:
            other += order
    return n_arom, other


def _fill(valences: tuple[int, ...], aromatic: bool, used: int) -> int:
    if aromatic:
        # aromatic atoms use their default valence only (thiophene s has no H)
        return max(0, valences[0] - used)
    target = next((v for v in valences if v >= used), None)
    return 0 if target is None else target - used


def _implicit_h(mol: Molecule, i: int) -> tuple[int, bool]:
    atom = mol.atoms[i]
    n_arom, other = _bond_sums(mol, i)
    valences = allowed_valences(atom.element, atom.formal_charge)
    if valences is None:
        return 0, True
    used = math.floor(1.5 * n_arom + other) + atom.explicit_h
    implicit = _fill(valences, atom.aromatic, used) if atom.fills_implicit_h else 0
    # aromatic bonds are checked at their single-bond lower bound here; the
    # pi assignment itself is validated by kekulization
    floor_used = (n_arom if atom.aromatic else math.floor(1.5 * n_arom)) + other
    ok = floor_used + atom.explicit_h + implicit <= max(valences)
    return implicit, ok


def default_implicit_h(mol: Molecule, i: int) -> int | None:
    """H count atom i would receive if written as a plain organic-subset symbol.

    Returns None when the element cannot be written without brackets.
    """
    atom = mol.atoms[i]
    if atom.element not in ORGANIC_SUBSET or atom.formal_charge or atom.isotope:
        return None
    n_arom, other = _bond_sums(mol, i)
    return _fill(allowed_valences(atom.element), atom.aromatic, math.floor(1.5 * n_arom + other))


def implicit_hydrogens(mol: Molecule, atom_index: int) -> int:
    """Implicit hydrogens on one atom under the default-valence rule.

    Aromatic bonds count 1.5 and the bond-order sum is rounded down; bracket
    atoms and elements outside the organic subset get none.
    """
    if not 0 <= atom_index < len(mol.atoms):
        raise IndexError(atom_index)
    return mol.implicit_h[atom_index]


def heavy_atom_count(mol: Molecule) -> int:
    return sum(1 for a in mol.atoms if a.element != 1)


# ---------------------------------------------------------------- rings


def _ring_systems(mol: Molecule) -> list[list[int]]:
    """Atom sets of the 2-edge-connected components with at least one cycle."""
    n = len(mol.atoms)
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    clock = 0
    for start in range(n):
        if disc[start] >= 0:
            continue
        disc[start] = low[start] = clock
        clock += 1
        stack = [(start, -1, iter(mol.adjacency[start]))]
        while stack:
            u, parent, it = stack[-1]
            v = next(it, None)
            if v is None:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add((min(u, parent), max(u, parent)))
                continue
            if v == parent:
                continue
            if disc[v] >= 0:
                low[u] = min(low[u], disc[v])
            else:
                disc[v] = low[v] = clock
                clock += 1
                stack.append((v, u, iter(mol.adjacency[v])))
    seen = [False] * n
    systems = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp, todo = [], [start]
        while todo:
            u = todo.pop()
            comp.append(u)
            for v in mol.adjacency[u]:
                if not seen[v] and (min(u, v), max(u, v)) not in bridges:
                    seen[v] = True
                    todo.append(v)
        if len(comp) > 2:
            systems.append(sorted(comp))
    return systems


def perceive_rings(mol: Molecule) -> list[tuple[int, ...]]:
    """Smallest set of smallest rings.

    Each ring system is handled separately. Candidate cycles are Horton's set
    (shortest path tree from every vertex plus one closing edge); they are
    sorted by size and greedily kept when linearly independent over GF(2).
    The result is a minimum cycle basis with exactly |E| - |V| + components
    rings.
    """
    if len(mol.bonds) < 3:
        return []
    rings = []
    for system in _ring_systems(mol):
        rings.extend(_system_rings(mol, system))
    return rings


def _system_rings(mol: Molecule, system: list[int]) -> list[tuple[int, ...]]:
    members = set(system)
    core = {u: [v for v in mol.adjacency[u] if v in members] for u in system}
    core_bonds = [(u, v) for u in system for v in core[u] if u < v]
    target = len(core_bonds) - len(system) + 1
    candidates: dict[int, tuple[int, ...]] = {}
    for root in system:
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in core[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        paths: dict[int, tuple[int, ...]] = {root: (root,)}
        for node in parent:  # BFS order: parents precede children
            if node != root:
                paths[node] = (node,) + paths[parent[node]]
        for x, y in core_bonds:
            if parent[x] == y or parent[y] == x:
                continue
            px, py = paths[x], paths[y]
            if len(set(px).intersection(py)) != 1:
                continue
            cycle = px + py[-2::-1]
            mask = 0
            for a, b in zip(cycle, cycle[1:] + cycle[:1]):
                mask |= 1 << mol.bond_index(a, b)
            if mask not in candidates:
                candidates[mask] = cycle
    ordered = sorted(candidates.items(), key=lambda kv: (len(kv[1]), sorted(kv[1]), kv[0]))
    basis: dict[int, int] = {}  # pivot bit -> reduced vector
    rings = []
    for mask, cycle in ordered:
        vec = mask
        while vec:
            pivot = vec.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = vec
                break
            vec ^= basis[pivot]
        if vec:
            rings.append(_rotate_ring(cycle))
            if len(rings) == target:
                break
    return rings


def _rotate_ring(cycle: tuple[int, ...]) -> tuple[int, ...]:
    k = cycle.index(min(cycle))
    ring = cycle[k:] + cycle[:k]
    if len(ring) > 2 and ring[-1] < ring[1]:
        ring = ring[:1] + ring[:0:-1]
    return ring


# --------------------------------------------------------- isomorphism


def _atom_label(mol: Molecule, i: int) -> tuple:
    a = mol.atoms[i]
    return (a.element, a.formal_charge, a.isotope or 0, a.aromatic, mol.total_h(i))


def _refine(labels: list, neighbors: Sequence[Sequence[tuple[int, int]]]) -> list[int]:
    """Weisfeiler-Lehman colour refinement to a stable partition.

    ``neighbors[i]`` holds (bond order, neighbour index) pairs. Colours are
    dense ranks that keep the order of the initial labels.
    """
    keys = sorted(set(labels))
    lookup = {k: c for c, k in enumerate(keys)}
    colors = [lookup[x] for x in labels]
    n_classes = len(keys)
    n = len(colors)
    while n_classes < n:
        # o * n + colour orders like the pair (o, colour) since colours are < n
        sigs = [(colors[i], tuple(sorted([o * n + colors[j] for o, j in nb]))) for i, nb in enumerate(neighbors)]
        keys = sorted(set(sigs))
        lookup = {k: c for c, k in enumerate(keys)}
        colors = [lookup[s] for s in sigs]
        if len(keys) == n_classes:
            break
        n_classes = len(keys)
    return colors


def graphs_isomorphic(a: Molecule, b: Molecule) -> bool:
    """Exact isomorphism test preserving atom attributes, H counts and bond orders."""
    n = len(a.atoms)
    if n != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False
    if n == 0:
        return True
    la = [_atom_label(a, i) + (a.degree(i),) for i in range(n)]
    lb = [_atom_label(b, i) + (b.degree(i),) for i in range(n)]
    if sorted(la) != sorted(lb):
        return False
    # refine both graphs jointly so colours are comparable
    nbrs = list(a.neighbor_orders) + [[(o, j + n) for o, j in x] for x in b.neighbor_orders]
    colors = _refine(la + lb, nbrs)
    ca, cb = colors[:n], colors[n:]
    if sorted(ca) != sorted(cb):
        return False

    by_color: dict[int, list[int]] = {}
    for j, c in enumerate(cb):
        by_color.setdefault(c, []).append(j)
    class_size = {c: len(v) for c, v in by_color.items()}

    # visit atoms of `a` connected-first, starting from the rarest colour
    sequence: list[int] = []
    seen = [False] * n
    for start in sorted(range(n), key=lambda i: (class_size[ca[i]], i)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            sequence.append(u)
            for v in sorted(a.adjacency[u], key=lambda x: (class_size[ca[x]], x)):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)

    mapping = [-1] * n
    used = [False] * n

    def extend(depth: int) -> bool:
        if depth == n:
            return True
        u = sequence[depth]
        mapped_nbrs = [(w, mapping[w]) for w in a.adjacency[u] if mapping[w] >= 0]
        for v in by_color[ca[u]]:
            if used[v]:
                continue
            ok = True
            for w, wv in mapped_nbrs:
                bv = b.bond_between(v, wv)
                if bv is None or bv.order != a.bond_between(u, w).order:
                    ok = False
                    break
            if not ok:
                continue
            if sum(1 for x in b.adjacency[v] if used[x]) != len(mapped_nbrs):
                continue
            mapping[u] = v
            used[v] = True
            if extend(depth + 1):
                return True
            mapping[u] = -1
            used[v] = False
        return False

    return extend(0)


# ------------------------------------------------------- transformations


def permute_atoms(mol: Molecule, order: Sequence[int]) -> Molecule:
    """Reorder atoms so that new atom ``i`` is old atom ``order[i]``."""
    if sorted(order) != list(range(len(mol.atoms))):
        raise ValueError("order must be a permutation of atom indices")
    new_index = {old: new for new, old in enumerate(order)}
    atoms = [mol.atoms[old] for old in order]
    bonds = sorted(
        (Bond(new_index[b.begin], new_index[b.end], b.order) for b in mol.bonds),
        key=lambda b: (b.begin, b.end),
    )
    out = Molecule(atoms, bonds)
    out.normalized = mol.normalized  # relabeling commutes with normalization
    if "_hydrogens" in mol.__dict__:
        # hydrogen counts depend only on each atom's own bonds
        counts, invalid = mol._hydrogens
        out.__dict__["_hydrogens"] = (tuple(counts[old] for old in order), invalid)
    return out


def fold_hydrogens(mol: Molecule) -> Molecule:
    """Fold plain explicit hydrogen atoms into their heavy neighbour's count."""
    drop = set()
    extra = [0] * len(mol.atoms)
    for i, atom in enumerate(mol.atoms):
        if (
            atom.element == 1
            and atom.isotope is None
            and atom.formal_charge == 0
            and atom.explicit_h == 0
            and mol.degree(i) == 1
        ):
            j = mol.adjacency[i][0]
            if mol.atoms[j].element != 1 and mol.bond_between(i, j).order is BondOrder.SINGLE:
                drop.add(i)
                extra[j] += 1
    if not drop:
        return mol
    return _subgraph(mol, [i for i in range(len(mol.atoms)) if i not in drop], extra)


def heavy_atom_graph(mol: Molecule) -> Molecule:
    """Drop every hydrogen atom, crediting it to its neighbour's H count."""
    keep = [i for i, a in enumerate(mol.atoms) if a.element != 1]
    if len(keep) == len(mol.atoms):
        return mol
    extra = [0] * len(mol.atoms)
    for i, a in enumerate(mol.atoms):
        if a.element == 1:
            for j in mol.adjacency[i]:
                extra[j] += 1
    return _subgraph(mol, keep, extra)


def _subgraph(mol: Molecule, keep: list[int], extra_h: list[int]) -> Molecule:
    new_index = {old: new for new, old in enumerate(keep)}
    atoms = []
    for old in keep:
        a = mol.atoms[old]
        if extra_h[old]:
            # keep the total H count fixed regardless of later valence filling
            total = a.explicit_h + mol.implicit_h[old] + extra_h[old]
            a = replace(a, explicit_h=total, bracket=True)
        atoms.append(a)
    bonds = [
        Bond(new_index[b.begin], new_index[b.end], b.order)
        for b in mol.bonds
        if b.begin in new_index and b.end in new_index
    ]
    return Molecule(atoms, bonds)
