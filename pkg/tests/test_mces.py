from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings

from fp2mol.mces import McesConfig, mces_distance, mces_lower_bound, mces_oracle
from fp2mol.molgraph import Molecule
from fp2mol.smiles import parse_smiles

from molgen import build_molecule, corpus_molecules, molecules


def _pairs(seed: int, count: int):
    rng = random.Random(seed)
    for _ in range(count):
        yield build_molecule(rng, 8, 3, max_bonds=10), build_molecule(rng, 8, 3, max_bonds=10)


def test_examples():
    cc, ccc = parse_smiles("CC"), parse_smiles("CCC")
    r = mces_distance(cc, ccc)
    assert (r.distance, r.common_edges, r.exact) == (1, 1, True)
    assert mces_oracle(cc, ccc).distance == 1
    assert mces_distance(cc, parse_smiles("[OH2]")).distance == 1
    benzene = parse_smiles("c1ccccc1")
    assert mces_distance(benzene, benzene).distance == 0
    assert mces_oracle(benzene, benzene).distance == 0
    assert mces_oracle(parse_smiles("C"), parse_smiles("N")).distance == 0
    assert mces_distance(Molecule(), Molecule()).distance == 0


def test_lower_bound_examples():
    cc = parse_smiles("CC")
    assert mces_lower_bound(cc, cc) == 0
    assert mces_lower_bound(cc, parse_smiles("CO")) == 2


def test_bond_match_modes():
    a, b = parse_smiles("C=CC"), parse_smiles("CCC")
    assert mces_distance(a, b).distance == 2
    assert mces_distance(a, b, McesConfig(bond_match="any-order")).distance == 0
    assert mces_oracle(a, b, McesConfig(bond_match="any-order")).distance == 0


def test_config_validation():
    with pytest.raises(ValueError):
        McesConfig(max_nodes_exact=0)
    with pytest.raises(ValueError):
        McesConfig(bond_match="loose")
    with pytest.raises(ValueError):
        McesConfig(time_budget=0)


def test_oracle_size_guard():
    big = parse_smiles("CCCCCCCCCCCC")
    with pytest.raises(ValueError):
        mces_oracle(big, big)


def test_branch_and_bound_matches_oracle_on_random_pairs():
    for a, b in _pairs(seed=1, count=60):
        exact = mces_distance(a, b)
        assert exact.exact
        assert exact.distance == mces_oracle(a, b).distance
        assert mces_lower_bound(a, b) <= exact.distance


def test_unbounded_search_is_exact_and_minimal():
    cfg = McesConfig(max_nodes_exact=10**6, time_budget=math.inf)
    for a, b in _pairs(seed=2, count=15):
        r = mces_distance(a, b, cfg)
        assert r.exact and r.distance == mces_oracle(a, b).distance


@settings(max_examples=60, deadline=None)
@given(molecules(), molecules())
def test_symmetry_and_invariants(a, b):
    ab, ba = mces_distance(a, b), mces_distance(b, a)
    assert ab.distance == ba.distance
    e1, e2 = len(a.bonds), len(b.bonds)
    assert ab.distance == e1 + e2 - 2 * ab.common_edges
    assert ab.distance >= abs(e1 - e2)
    assert mces_lower_bound(a, b) <= ab.distance


def test_identity_on_corpus_molecules_within_gate():
    for ident, _, mol in corpus_molecules():
        if len(mol.atoms) <= 20:
            r = mces_distance(mol, mol)
            assert r.distance == 0 and r.exact, ident


def test_oversized_pairs_report_inexact_upper_bound():
    mols = [m for _, _, m in corpus_molecules() if len(m.atoms) > 25][:2]
    r = mces_distance(*mols, McesConfig(time_budget=0.2))
    assert not r.exact
    assert r.distance >= mces_lower_bound(*mols)


def test_node_budget_is_deterministic():
    mols = [m for _, _, m in corpus_molecules() if len(m.atoms) > 25][:2]
    cfg = McesConfig(time_budget=math.inf, max_search_nodes=3000)
    first, second = mces_distance(*mols, cfg), mces_distance(*mols, cfg)
    assert (first.distance, first.exact) == (second.distance, second.exact)
