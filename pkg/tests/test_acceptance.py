"""Acceptance criteria 1-10, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the criterion lines
are written straight to the terminal, bypassing output capture.
"""

from __future__ import annotations

import inspect
import json
import math
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fp2mol.decoder import TrainConfig, ToyTransformerParams, beam_search, greedy_decode, rescore, train
from fp2mol.evaluation import EvalConfig, evaluate_example
from fp2mol.fingerprint import (
    DEFAULT_RADIUS,
    DEFAULT_WIDTH,
    ProbFingerprint,
    fingerprint_to_onbits,
    morgan_fingerprint,
    threshold_onbits,
)
from fp2mol.mces import mces_distance, mces_lower_bound, mces_oracle
from fp2mol.molgraph import graphs_isomorphic, permute_atoms
from fp2mol.smiles import canonical_smiles, detokenize, parse_smiles, tokenize_smiles, write_smiles

from fixtures import expected_values, random_fixture
from gradcheck import finite_difference_check
from mocks import brute_force_ranking, random_table_model
from molgen import build_molecule, corpus, corpus_molecules, shuffled


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


# 1 -------------------------------------------------------------------------


def test_criterion_01_round_trip_and_permutation_invariance(verdict):
    start = time.perf_counter()
    rng = random.Random(1)
    mols = corpus_molecules()
    failures = []
    for ident, _, mol in mols:
        canon = write_smiles(mol, canonical=True)
        if not graphs_isomorphic(parse_smiles(canon), mol):
            failures.append(f"{ident}: round trip")
            continue
        for _ in range(100):
            if write_smiles(permute_atoms(mol, shuffled(mol, rng)), canonical=True) != canon:
                failures.append(f"{ident}: permutation")
                break
    elapsed = time.perf_counter() - start
    ok = len(mols) >= 500 and not failures and elapsed < 60
    verdict(1, ok, f"{len(mols)} molecules x 100 permutations, {len(failures)} failures {failures[:3]}, {elapsed:.1f}s (< 60s)")


# 2 -------------------------------------------------------------------------


def test_criterion_02_tokenizer_is_lossless(verdict):
    failures = []
    for entry in corpus():
        try:
            tokens = tokenize_smiles(entry.smiles)
        except ValueError as exc:
            failures.append(f"{entry.id}: {exc}")
            continue
        if detokenize(tokens) != entry.smiles or "".join(tokens) != entry.smiles:
            failures.append(entry.id)
    n = len(corpus())
    verdict(2, not failures, f"{n - len(failures)}/{n} corpus strings tokenize and detokenize to themselves")


# 3 -------------------------------------------------------------------------

_FP_SCRIPT = """
import hashlib, sys
from importlib.resources import files
from fp2mol.fingerprint import morgan_fingerprint
from fp2mol.smiles import parse_smiles, read_corpus
text = files("fp2mol").joinpath("data/druglike.smi").read_text(encoding="utf-8")
h = hashlib.sha256()
for e in read_corpus(text.splitlines()):
    h.update(e.id.encode() + b"\\0" + morgan_fingerprint(parse_smiles(e.smiles)).to_bytes())
print(h.hexdigest())
"""


def test_criterion_03_fingerprint_determinism_and_invariance(verdict):
    digests = []
    for seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=seed)
        out = subprocess.run([sys.executable, "-c", _FP_SCRIPT], env=env, capture_output=True, text=True, check=True)
        digests.append(out.stdout.strip())
    rng = random.Random(3)
    variant = []
    for ident, _, mol in corpus_molecules():
        ref = morgan_fingerprint(mol)
        if ref.width != 4096:
            variant.append(f"{ident}: width {ref.width}")
        for _ in range(5):
            if morgan_fingerprint(permute_atoms(mol, shuffled(mol, rng))).to_bytes() != ref.to_bytes():
                variant.append(ident)
                break
    sig = inspect.signature(morgan_fingerprint).parameters
    defaults = (DEFAULT_RADIUS, DEFAULT_WIDTH, sig["radius"].default, sig["width"].default) == (2, 4096, 2, 4096)
    ok = digests[0] == digests[1] and not variant and defaults
    verdict(
        3, ok,
        f"two processes {'agree' if digests[0] == digests[1] else 'DIFFER'}, "
        f"{len(variant)} permutation-variant molecules, defaults radius 2 / 4096 bits: {defaults}",
    )


# 4 -------------------------------------------------------------------------

# Hand-derived values. With radius 2 and bond-set deduplication, CC sets two
# bits, CCC four and CCO six. CC shares only the methyl atom bit with CCC
# (1/5). CCO shares the methyl and methylene atom bits and the methyl-next-to-
# methylene environment with CCC (3/7). Heavy-atom MCES: CC/CCC share one C-C
# edge (1 + 2 - 2 = 1); CCO/CCC share one C-C edge (2 + 2 - 2 = 2).
_HAND = [
    # truth, candidates, {k: (hit, mces, tanimoto)}
    ("CCC", ["CC", "C(C", "CCO", "CCC"], {
        1: (False, 1.0, 1 / 5), 2: (False, 1.0, 1 / 5), 3: (False, 1.0, 3 / 7), 4: (True, 0.0, 1.0),
    }),
    ("CCC", ["C(CC)", "CC"], {1: (True, 0.0, 1.0), 2: (True, 0.0, 1.0)}),
    ("CCO", ["CCC", "OCC"], {1: (False, 2.0, 3 / 7), 2: (True, 0.0, 1.0)}),
    ("CC", [], {1: (False, 100.0, 0.0), 10: (False, 100.0, 0.0)}),
    ("CC", ["Xx", "C1CC"], {1: (False, 100.0, 0.0), 2: (False, 100.0, 0.0)}),
]


def test_criterion_04_metric_identities(verdict):
    start = time.perf_counter()
    mismatches = []
    for truth, cands, table in _HAND:
        res = evaluate_example("h", cands, parse_smiles(truth), EvalConfig(ks=tuple(table)))
        for k, (hit, dist, sim) in table.items():
            got = (res.hits[k], res.mces_best[k], res.tanimoto_best[k])
            if got[0] != hit or got[1] != dist or not math.isclose(got[2], sim, rel_tol=0, abs_tol=1e-15):
                mismatches.append(f"{truth}@{k}: {got} != {(hit, dist, sim)}")
    ks = (1, 2, 3, 5, 10)
    rng = random.Random(4)
    broken = 0
    for _ in range(1000):
        fx = random_fixture(rng, max_candidates=10, max_atoms=6)
        res = evaluate_example("r", fx.candidates, parse_smiles(fx.truth), EvalConfig(ks=ks))
        bad = False
        for k in ks:
            if (res.hits[k], res.mces_best[k], res.tanimoto_best[k]) != expected_values(fx.candidates, fx.truth, k):
                bad = True
            if fx.truth_rank is not None and fx.truth_rank <= k and not res.hits[k]:
                bad = True
            if res.hits[k] and (res.mces_best[k] != 0 or res.tanimoto_best[k] != 1.0):
                bad = True
        for a, b in zip(ks, ks[1:]):
            if res.hits[a] > res.hits[b] or res.mces_best[b] > res.mces_best[a]:
                bad = True
            if res.tanimoto_best[b] < res.tanimoto_best[a]:
                bad = True
        broken += bad
    ok = not mismatches and broken == 0
    verdict(
        4, ok,
        f"{len(_HAND)} hand fixtures ({len(mismatches)} mismatches {mismatches[:2]}), "
        f"1000 randomized fixtures with {broken} violations, {time.perf_counter() - start:.1f}s",
    )


# 5 -------------------------------------------------------------------------


def test_criterion_05_mces_oracle_equivalence(verdict):
    start = time.perf_counter()
    rng = random.Random(5)
    disagree = unsound = inexact = identity = 0
    for _ in range(200):
        a = build_molecule(rng, 8, 3, max_bonds=10)
        b = build_molecule(rng, 8, 3, max_bonds=10)
        exact = mces_distance(a, b)
        truth = mces_oracle(a, b)
        disagree += exact.distance != truth.distance
        inexact += not exact.exact
        unsound += mces_lower_bound(a, b) > truth.distance
        for m in (a, b):
            identity += mces_distance(m, m).distance != 0 or mces_oracle(m, m).distance != 0
    elapsed = time.perf_counter() - start
    ok = not (disagree or unsound or inexact or identity) and elapsed < 300
    verdict(
        5, ok,
        f"200 pairs: {disagree} oracle disagreements, {inexact} inexact, {unsound} bound violations, "
        f"{identity} nonzero identities, {elapsed:.1f}s (< 300s)",
    )


# 6 -------------------------------------------------------------------------


def test_criterion_06_beam_search_exactness(verdict):
    cases = wrong = 0
    worst = 0.0
    for n_tokens in (1, 2, 3, 4):
        for max_len in (1, 2, 3, 4):
            for seed in range(3):
                model = random_table_model(n_tokens, max_len, seed)
                truth = brute_force_ranking(model, max_len)
                got = beam_search(model, (), beam=len(truth), max_len=max_len, dedup=False)
                for k in (1, 2, 5):
                    cases += 1
                    top = truth[:k]
                    if [c.ids for c in got[:k]] != [ids for _, ids in top]:
                        wrong += 1
                    elif any(abs(c.logprob - s) > 1e-9 for c, (s, _) in zip(got, top)):
                        wrong += 1
                greedy = greedy_decode(model, (), max_len=max_len)
                one = beam_search(model, (), beam=1, max_len=max_len, dedup=False)
                cases += 1
                wrong += [c.ids for c in one] != [greedy.ids]
                for c in got:
                    worst = max(worst, abs(rescore(model, (), c.ids) - c.logprob))
    ok = wrong == 0 and worst <= 1e-6
    verdict(6, ok, f"{cases - wrong}/{cases} top-k and greedy comparisons exact, worst rescoring gap {worst:.1e} (<= 1e-6)")


# 7 -------------------------------------------------------------------------


def test_criterion_07_gradient_check(verdict):
    errors = finite_difference_check(seed=7, coordinates=20, step=1e-4)
    worst = max(errors)
    verdict(7, len(errors) >= 20 and worst < 1e-4, f"{len(errors)} coordinates, worst relative error {worst:.2e} (< 1e-4)")


# 8 -------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_memorization(verdict):
    start = time.perf_counter()
    entries = corpus()
    step = len(entries) // 50
    picked = [entries[i * step] for i in range(50)]
    pairs, truths = [], []
    for e in picked:
        mol = parse_smiles(e.smiles)
        canon = write_smiles(mol, canonical=True)
        pairs.append((fingerprint_to_onbits(morgan_fingerprint(mol)), tokenize_smiles(canon)))
        truths.append(canon)
    # batch 8 gives several optimizer steps per epoch on 50 pairs; stop_loss
    # ends training once the per-token loss has flattened out
    cfg = TrainConfig(learning_rate=5e-4, batch_size=8, epochs=200, seed=0, stop_loss=0.005)
    model = train(ToyTransformerParams(), pairs, cfg, DEFAULT_WIDTH)
    epochs = len(model.loss_history) - 1
    trained = time.perf_counter() - start
    greedy_hits = top1 = top10 = 0
    for (onbits, _), truth in zip(pairs, truths):
        greedy_hits += canonical_smiles(greedy_decode(model, onbits).smiles) == truth
        keys = [canonical_smiles(c.smiles) for c in beam_search(model, onbits, beam=10)]
        top1 += truth in keys[:1]
        top10 += truth in keys
    elapsed = time.perf_counter() - start
    ok = epochs <= 200 and elapsed < 600 and greedy_hits >= 45 and top10 >= top1
    verdict(
        8, ok,
        f"{epochs} epochs (final loss {model.loss_history[-1]:.4f}, {trained:.0f}s), greedy {greedy_hits}/50 "
        f"(>= 45), beam-10 top-1 {top1}/50 top-10 {top10}/50, total {elapsed:.0f}s (< 600s)",
    )


# 9 -------------------------------------------------------------------------


def test_criterion_09_threshold_is_inclusive(verdict):
    checks = []
    for t in (0.5, 0.25, 0.1, 0.9, 1.0, 0.0):
        probs = np.array([t, np.nextafter(t, -1.0), np.nextafter(t, 2.0), 0.0, 1.0])
        probs = np.clip(probs, 0.0, 1.0)
        got = threshold_onbits(ProbFingerprint(probs), t)
        expected = tuple(i for i, p in enumerate(probs) if p >= t)
        checks.append((t, tuple(got) == expected and 0 in got))
    default = threshold_onbits(ProbFingerprint(np.array([0.5, 0.49999999, 0.5000001])))
    ok = all(c for _, c in checks) and tuple(default) == (0, 2)
    verdict(9, ok, f"p == t included for t in {[t for t, _ in checks]}; default t=0.5 keeps bits {tuple(default)}")


# 10 ------------------------------------------------------------------------

_E2E_CORPUS = """\
e1\tCCO
e2\tCC(=O)O
e3\tc1ccccc1
e4\tCCN
e5\tOCCO
e6\tCC(C)O
e7\tC1CCCCC1
e8\tCOC
e9\tc1ccncc1
e10\tCC#N
"""

_SMALL = ["--embed-dim", "16", "--layers", "1", "--heads", "2", "--ff-dim", "32", "--max-onbits", "64",
          "--max-tokens", "40", "--batch", "4", "--epochs", "30", "--lr", "3e-3", "--seed", "11"]


def _pipeline(work: Path) -> dict[str, bytes]:
    work.mkdir()
    (work / "corpus.smi").write_text(_E2E_CORPUS)

    def run(*args: str) -> None:
        cmd = [sys.executable, "-m", "fp2mol", *args, "-q"]
        done = subprocess.run(cmd, cwd=work, capture_output=True, text=True)
        if done.returncode != 0:
            raise AssertionError(f"{args[0]} exited {done.returncode}: {done.stderr}")

    run("fingerprint", "corpus.smi", "fp.jsonl")
    run("train", "corpus.smi", "fp.jsonl", "model.bin", *_SMALL)
    run("decode", "model.bin", "fp.jsonl", "pred.jsonl", "--beam", "5", "--max-len", "30")
    run("evaluate", "pred.jsonl", "corpus.smi", "report.json", "--mces-time-budget", "1e6", "--mces-max-nodes", "200000")
    return {name: (work / name).read_bytes() for name in ("fp.jsonl", "model.bin", "pred.jsonl", "report.json", "report.tsv")}


def test_criterion_10_end_to_end_determinism(verdict, tmp_path):
    first = _pipeline(tmp_path / "run1")
    second = _pipeline(tmp_path / "run2")
    differing = [name for name in first if first[name] != second[name]]
    report = json.loads(first["report.json"])
    verdict(
        10, not differing,
        f"fingerprint/train/decode/evaluate repeated: differing artifacts {differing or 'none'}; "
        f"top-1 accuracy {report['aggregate']['top1']['accuracy']:.2f}",
    )
