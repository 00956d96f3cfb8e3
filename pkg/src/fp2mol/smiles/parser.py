"""SMILES reader."""

from __future__ import annotations

import logging
import re

from ..molgraph import ATOMIC_NUMBER, Atom, Bond, BondOrder, Molecule, MoleculeError, fold_hydrogens
from .tokens import _TOKEN

__all__ = ["SmilesError", "parse_smiles"]

logger = logging.getLogger(__name__)

_BRACKET = re.compile(
    r"^\[(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|se|as|b|c|n|o|p|s|\*)"
    r"(?P<chiral>@@?(?:TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>[+-]\d+|\++|-+)?"
    r"(?::\d+)?\]$"
)
_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
}


class SmilesError(ValueError):
    """Malformed SMILES; ``position`` is the character offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


def _bracket_atom(token: str, pos: int) -> tuple[Atom, bool]:
    m = _BRACKET.match(token)
    if m is None:
        raise SmilesError(f"malformed bracket atom {token}", pos)
    symbol = m.group("symbol")
    if symbol == "*":
        raise SmilesError("wildcard atoms are not supported", pos)
    aromatic = symbol.islower()
    element = ATOMIC_NUMBER.get(symbol.capitalize())
    if element is None:
        raise SmilesError(f"unknown element {symbol}", pos)
    hcount = m.group("hcount")
    h = 0 if hcount is None else int(hcount[1:] or 1)
    charge_text = m.group("charge") or ""
    if not charge_text:
        charge = 0
    elif charge_text[1:].isdigit():
        charge = int(charge_text)
    else:
        charge = len(charge_text) * (1 if charge_text[0] == "+" else -1)
    isotope = m.group("isotope")
    try:
        atom = Atom(
            element,
            formal_charge=charge,
            explicit_h=h,
            aromatic=aromatic,
            isotope=int(isotope) if isotope else None,
            bracket=True,
        )
    except MoleculeError as exc:
        raise SmilesError(str(exc), pos) from None
    return atom, m.group("chiral") is not None


def _organic_atom(token: str) -> Atom:
    return Atom(ATOMIC_NUMBER[token.capitalize()], aromatic=token.islower())


def parse_smiles(text: str, sanitize: bool = True) -> Molecule:
    """Parse a SMILES string into a heavy-atom molecular graph.

    Stereo markers are accepted and dropped. With ``sanitize`` (the default)
    the aromaticity model is re-applied so that Kekulé and aromatic spellings
    of the same structure yield the same graph.
    """
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    bonded: set[tuple[int, int]] = set()
    rings: dict[str, tuple[int, str | None, int]] = {}
    branches: list[int] = []
    prev: int | None = None
    pending: str | None = None
    pending_pos = 0
    stereo = False
    pos = 0

    def add_bond(a: int, b: int, symbol: str | None, where: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b:
            raise SmilesError("ring closure bonds an atom to itself", where)
        if key in bonded:
            raise SmilesError("duplicate bond between the same atoms", where)
        if symbol is None:
            both_aromatic = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        else:
            order = _BOND_SYMBOLS[symbol]
        bonded.add(key)
        bonds.append(Bond(a, b, order))

    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SmilesError(f"illegal character {text[pos]!r}", pos)
        tok = m.group()
        if tok.startswith("[") or tok in ("Cl", "Br") or tok in "BCNOPSFIbcnops":
            if tok.startswith("["):
                atom, chiral = _bracket_atom(tok, pos)
                stereo |= chiral
            else:
                atom = _organic_atom(tok)
            atoms.append(atom)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, pending_pos)
            elif pending is not None:
                raise SmilesError("bond symbol without a preceding atom", pending_pos)
            prev, pending = idx, None
        elif tok in _BOND_SYMBOLS:
            if prev is None or pending is not None:
                raise SmilesError(f"unexpected bond symbol {tok!r}", pos)
            stereo |= tok in "/\\"
            pending, pending_pos = tok, pos
        elif tok == "(":
            if prev is None or pending is not None:
                raise SmilesError("branch must follow an atom", pos)
            branches.append(prev)
        elif tok == ")":
            if not branches:
                raise SmilesError("unmatched closing parenthesis", pos)
            if pending is not None:
                raise SmilesError("dangling bond at end of branch", pending_pos)
            prev = branches.pop()
        elif tok == ".":
            if prev is None or pending is not None or branches:
                raise SmilesError("misplaced dot", pos)
            prev = None
        elif tok[0].isdigit() or tok.startswith("%"):
            if len(tok) == 1 and tok == "%":
                raise SmilesError("ring closure '%' needs two digits", pos)
            if prev is None:
                raise SmilesError("ring closure without a preceding atom", pos)
            label = tok.lstrip("%")
            if label in rings:
                other, symbol, open_pos = rings.pop(label)
                if symbol is not None and pending is not None and symbol != pending:
                    raise SmilesError(f"conflicting bond symbols on ring closure {label}", pos)
                add_bond(other, prev, pending if pending is not None else symbol, pos)
            else:
                rings[label] = (prev, pending, pos)
            pending = None
        elif tok == "*":
            raise SmilesError("wildcard atoms are not supported", pos)
        else:
            raise SmilesError(f"unsupported token {tok!r}", pos)
        pos = m.end()

    if pending is not None:
        raise SmilesError("dangling bond at end of input", pending_pos)
    if branches:
        raise SmilesError("unmatched opening parenthesis", len(text))
    if rings:
        label, (_, _, where) = min(rings.items(), key=lambda kv: kv[1][2])
        raise SmilesError(f"unclosed ring bond {label}", where)
    if stereo:
        logger.warning("stereochemistry stripped from %s", text)

    mol = fold_hydrogens(Molecule(atoms, bonds))
    if sanitize:
        from .aromaticity import normalize

        mol = normalize(mol)
    return mol
