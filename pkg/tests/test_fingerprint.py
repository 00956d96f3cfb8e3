from __future__ import annotations

import json
import logging
import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fp2mol.fingerprint import (
    DEFAULT_RADIUS,
    DEFAULT_WIDTH,
    Fingerprint,
    ProbFingerprint,
    environment_identifiers,
    fingerprint_to_onbits,
    fnv1a_64,
    format_fingerprint_record,
    morgan_fingerprint,
    read_fingerprint_records,
    tanimoto,
    threshold_onbits,
    validate_onbits,
)
from fp2mol.molgraph import permute_atoms
from fp2mol.smiles import parse_smiles

from molgen import corpus_molecules, molecules, shuffled


def test_defaults():
    assert (DEFAULT_RADIUS, DEFAULT_WIDTH) == (2, 4096)


@pytest.mark.parametrize(
    "data, digest",
    [(b"", 0xCBF29CE484222325), (b"a", 0xAF63DC4C8601EC8C), (b"foobar", 0x85944171F73967E8)],
)
def test_fnv1a_published_vectors(data, digest):
    assert fnv1a_64(data) == digest


def test_methane_sets_one_bit():
    assert morgan_fingerprint(parse_smiles("C")).count() == 1


def _distinct_environments(smiles: str, radius: int) -> int:
    """Radius-0 atoms plus distinct non-empty bond sets within each radius ball."""
    mol = parse_smiles(smiles)
    g = nx.Graph([(b.begin, b.end) for b in mol.bonds])
    g.add_nodes_from(range(len(mol.atoms)))
    seen = set()
    for atom in g:
        for r in range(1, radius + 1):
            near = nx.single_source_shortest_path_length(g, atom, cutoff=r)
            # bonds reached within r hops of the centre
            bonds = frozenset(
                frozenset((u, v)) for u, v in g.edges() if u in near and v in near and min(near[u], near[v]) < r
            )
            if bonds:
                seen.add(bonds)
    return len(mol.atoms) + len(seen)


@pytest.mark.parametrize("smiles", ["CCO", "CC(C)O", "C1CC1", "c1ccccc1O", "CC(=O)Oc1ccccc1C(=O)O"])
def test_identifier_count_matches_brute_force_environment_enumeration(smiles):
    assert len(environment_identifiers(parse_smiles(smiles), 2)) == _distinct_environments(smiles, 2)


def test_ethanol_bit_count():
    fp = morgan_fingerprint(parse_smiles("CCO"))
    assert fp.count() == _distinct_environments("CCO", 2) == 6


def test_disjoint_fragments_union_identifier_multisets():
    a, b = "CCO", "c1ccncc1"
    joint = environment_identifiers(parse_smiles(f"{a}.{b}"))
    parts = environment_identifiers(parse_smiles(a)) + environment_identifiers(parse_smiles(b))
    assert sorted(joint) == sorted(parts)


def test_permutation_invariance_sample():
    rng = random.Random(5)
    for _, _, mol in corpus_molecules()[::40]:
        ref = morgan_fingerprint(mol).to_bytes()
        for _ in range(100):
            assert morgan_fingerprint(permute_atoms(mol, shuffled(mol, rng))).to_bytes() == ref


def test_radius_zero_and_width_validation():
    mol = parse_smiles("CCO")
    assert len(environment_identifiers(mol, 0)) == 3
    with pytest.raises(ValueError):
        morgan_fingerprint(mol, width=0)
    with pytest.raises(ValueError):
        environment_identifiers(mol, -1)


def test_tanimoto_examples():
    f = Fingerprint.from_onbits([1, 2], 8)
    g = Fingerprint.from_onbits([2, 3], 8)
    assert tanimoto(f, f) == 1.0
    assert tanimoto(f, g) == pytest.approx(1 / 3)
    empty = Fingerprint.from_onbits([], 8)
    assert tanimoto(empty, empty) == 0.0
    with pytest.raises(ValueError):
        tanimoto(f, Fingerprint.from_onbits([], 16))


@settings(max_examples=300)
@given(st.lists(st.booleans(), min_size=16, max_size=16), st.lists(st.booleans(), min_size=16, max_size=16))
def test_tanimoto_properties(x, y):
    a, b = Fingerprint(np.array(x)), Fingerprint(np.array(y))
    t = tanimoto(a, b)
    assert 0.0 <= t <= 1.0
    assert t == tanimoto(b, a)
    if any(x) or any(y):
        assert (t == 1.0) == (x == y)
    inter = sum(p and q for p, q in zip(x, y))
    union = sum(p or q for p, q in zip(x, y))
    assert t == (inter / union if union else 0.0)


def test_threshold_examples(caplog):
    p = ProbFingerprint(np.array([0.2, 0.5, 0.9]))
    assert threshold_onbits(p, 0.5) == (1, 2)
    assert threshold_onbits(p, 0.0) == (0, 1, 2)
    with caplog.at_level(logging.WARNING):
        assert threshold_onbits(p, 1.01) == ()
    assert "outside" in caplog.text


@settings(max_examples=200)
@given(st.sets(st.integers(0, 63)))
def test_threshold_of_binary_fingerprint_gives_its_onbits(bits):
    f = Fingerprint.from_onbits(sorted(bits), 64)
    assert threshold_onbits(f.as_probs(), 0.5) == fingerprint_to_onbits(f) == tuple(sorted(bits))


def test_onbits_examples():
    assert fingerprint_to_onbits(Fingerprint(np.zeros(4096, dtype=bool))) == ()
    assert fingerprint_to_onbits(Fingerprint.from_onbits([0, 4095])) == (0, 4095)


def test_validation():
    with pytest.raises(ValueError):
        ProbFingerprint(np.array([0.1, 1.2]))
    with pytest.raises(ValueError):
        validate_onbits([3, 3], 8)
    with pytest.raises(ValueError):
        validate_onbits([1, 9], 8)
    with pytest.raises(ValueError):
        Fingerprint.from_onbits([8], 8)


def test_record_io_round_trip_and_errors():
    lines = [
        format_fingerprint_record("a", [1, 5], 8),
        json.dumps({"id": "b", "width": 4, "probs": [0.0, 0.5, 0.49, 1.0]}),
        "{not json",
        json.dumps({"id": "c", "width": 4, "probs": [0.1]}),
        "",
        json.dumps({"id": "d", "width": 4}),
    ]
    out = list(read_fingerprint_records(lines))
    assert [n for n, _ in out] == [1, 2, 3, 4, 6]
    a, b = out[0][1], out[1][1]
    assert a.onbits == (1, 5) and a.to_onbits() == (1, 5)
    assert b.to_onbits(0.5) == (1, 3)
    assert all(isinstance(rec, ValueError) for _, rec in out[2:])
    assert "line 3" in str(out[2][1])


@settings(max_examples=100, deadline=None)
@given(molecules())
def test_fingerprint_is_deterministic_and_canonical(mol):
    from fp2mol.smiles import write_smiles

    again = parse_smiles(write_smiles(mol, canonical=True))
    assert morgan_fingerprint(mol) == morgan_fingerprint(again)
