"""Circular (Morgan) fingerprints, on-bit thresholding and Tanimoto similarity.

Identifiers are 64-bit FNV-1a hashes over a fixed little-endian encoding, so
bit patterns are reproducible across runs and platforms but are not the same
bit space as any external toolkit.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .molgraph import Molecule, heavy_atom_graph

__all__ = [
    "GENERATOR_ID",
    "DEFAULT_RADIUS",
    "DEFAULT_WIDTH",
    "Fingerprint",
    "ProbFingerprint",
    "OnBitSequence",
    "FingerprintRecord",
    "fnv1a_64",
    "environment_identifiers",
    "morgan_fingerprint",
    "tanimoto",
    "threshold_onbits",
    "fingerprint_to_onbits",
    "validate_onbits",
    "read_fingerprint_records",
    "format_fingerprint_record",
]

logger = logging.getLogger(__name__)

DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 4096
GENERATOR_ID = "fp2mol-morgan-fnv1a64/1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

OnBitSequence = tuple[int, ...]


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bit vector; ``bits`` is a read-only boolean array."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool).copy()
        if bits.ndim != 1 or bits.size < 1:
            raise ValueError("fingerprint must be a non-empty 1-d bit vector")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_onbits(cls, onbits: Iterable[int], width: int = DEFAULT_WIDTH) -> Fingerprint:
        bits = np.zeros(width, dtype=bool)
        idx = np.fromiter(onbits, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= width):
            raise ValueError(f"on-bit index outside [0, {width})")
        bits[idx] = True
        return cls(bits)

    @property
    def width(self) -> int:
        return int(self.bits.size)

    def count(self) -> int:
        return int(self.bits.sum())

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits, bitorder="little").tobytes()

    def as_probs(self) -> ProbFingerprint:
        return ProbFingerprint(self.bits.astype(np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return self.width == other.width and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash(self.to_bytes())


@dataclass(frozen=True)
class ProbFingerprint:
    """Per-bit probabilities as produced by a spectrum encoder."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("probability fingerprint must be a non-empty 1-d vector")
        if not np.all((probs >= 0.0) & (probs <= 1.0)):
            raise ValueError("fingerprint probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def width(self) -> int:
        return int(self.probs.size)


def validate_onbits(indices: Sequence[int], width: int) -> OnBitSequence:
    out = tuple(int(i) for i in indices)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("on-bit indices must be strictly increasing")
    if out and (out[0] < 0 or out[-1] >= width):
        raise ValueError(f"on-bit index outside [0, {width})")
    return out


# ------------------------------------------------------------- Morgan


def _atom_invariant(mol: Molecule, i: int) -> bytes:
    atom = mol.atoms[i]
    return struct.pack(
        "<6q",
        atom.element,
        mol.degree(i),
        atom.formal_charge,
        mol.total_h(i),
        int(atom.aromatic),
        int(i in mol.ring_atoms),
    )


def environment_identifiers(mol: Molecule, radius: int = DEFAULT_RADIUS) -> list[int]:
    """Raw (unfolded) identifiers of every retained atom environment.

    One identifier per heavy atom at radius 0. At radius r >= 1 each atom's
    identifier hashes its previous identifier with the sorted (bond order,
    neighbour identifier) pairs; environments covering an identical bond set
    collapse to the smallest identifier, and atoms without bonds contribute
    nothing beyond radius 0.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    mol = heavy_atom_graph(mol)
    n = len(mol.atoms)
    ids = [fnv1a_64(_atom_invariant(mol, i)) for i in range(n)]
    out = list(ids)
    envs: dict[int, int] = {}  # bond-set mask -> smallest identifier
    coverage = [0] * n
    for r in range(1, radius + 1):
        new_ids = []
        new_cov = []
        for i in range(n):
            pairs = sorted((int(order), ids[j]) for order, j in mol.neighbor_orders[i])
            payload = struct.pack("<qQ", r, ids[i]) + b"".join(struct.pack("<qQ", o, h) for o, h in pairs)
            new_ids.append(fnv1a_64(payload))
            cov = coverage[i]
            for _, j in mol.neighbor_orders[i]:
                cov |= coverage[j] | (1 << mol.bond_index(i, j))
            new_cov.append(cov)
        for ident, cov in zip(new_ids, new_cov):
            if cov and (cov not in envs or ident < envs[cov]):
                envs[cov] = ident
        ids, coverage = new_ids, new_cov
    out.extend(envs[cov] for cov in sorted(envs))
    return out


def morgan_fingerprint(mol: Molecule, radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH) -> Fingerprint:
    """Fold circular environment identifiers into a ``width``-bit vector."""
    if width < 1:
        raise ValueError("width must be positive")
    bits = np.zeros(width, dtype=bool)
    for ident in environment_identifiers(mol, radius):
        bits[ident % width] = True
    return Fingerprint(bits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; two empty fingerprints score 0.0."""
    if a.width != b.width:
        raise ValueError(f"fingerprint width mismatch: {a.width} vs {b.width}")
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a.bits & b.bits)) / union


def threshold_onbits(p: ProbFingerprint, t: float = 0.5) -> OnBitSequence:
    """Indices whose probability is at least ``t`` (inclusive), ascending."""
    if not 0.0 <= t <= 1.0:
        logger.warning("threshold %g lies outside [0, 1]", t)
    return tuple(int(i) for i in np.flatnonzero(p.probs >= t))


def fingerprint_to_onbits(f: Fingerprint) -> OnBitSequence:
    return tuple(int(i) for i in np.flatnonzero(f.bits))


# ------------------------------------------------------------- files


@dataclass(frozen=True)
class FingerprintRecord:
    """One line of a fingerprint file: either probabilities or on-bits."""

    id: str
    width: int
    probs: ProbFingerprint | None = None
    onbits: OnBitSequence | None = None

    def to_onbits(self, threshold: float = 0.5) -> OnBitSequence:
        if self.onbits is not None:
            return self.onbits
        return threshold_onbits(self.probs, threshold)


def _record_from_json(obj: object) -> FingerprintRecord:
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
        raise ValueError('record must be an object with a string "id"')
    width = obj.get("width")
    if not isinstance(width, int) or width < 1:
        raise ValueError('record needs a positive integer "width"')
    if "probs" in obj:
        probs = ProbFingerprint(np.asarray(obj["probs"], dtype=np.float64))
        if probs.width != width:
            raise ValueError(f"probs length {probs.width} does not match width {width}")
        return FingerprintRecord(obj["id"], width, probs=probs)
    if "onbits" in obj:
        return FingerprintRecord(obj["id"], width, onbits=validate_onbits(obj["onbits"], width))
    raise ValueError('record needs "probs" or "onbits"')


def read_fingerprint_records(lines: Iterable[str]) -> Iterator[tuple[int, FingerprintRecord | ValueError]]:
    """Parse JSON-lines fingerprint records.

    Yields ``(line_number, record)``; malformed lines yield the ValueError in
    place of the record so callers can decide whether to stop.
    """
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, _record_from_json(json.loads(line))
        except (ValueError, TypeError) as exc:
            yield lineno, ValueError(f"line {lineno}: {exc}")


def format_fingerprint_record(ident: str, onbits: Sequence[int], width: int) -> str:
    return json.dumps({"id": ident, "width": width, "onbits": list(onbits)}, separators=(",", ":"))
