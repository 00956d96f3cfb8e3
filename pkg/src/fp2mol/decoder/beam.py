"""Beam-search and greedy decoding over a DecoderModel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..smiles import canonical_smiles, detokenize
from ..smiles.tokens import RESERVED, Vocab
from .model import DecoderModel

__all__ = ["Candidate", "beam_search", "greedy_decode", "rescore"]


@dataclass(frozen=True)
class Candidate:
    """A decoded SMILES with its cumulative log-probability.

    ``ids`` runs from BOS through EOS; ``complete`` is False only for the
    fallback returned when nothing reached EOS within the length limit.
    """

    smiles: str
    logprob: float
    ids: tuple[int, ...]
    tokens: tuple[str, ...]
    complete: bool = True

    @classmethod
    def from_ids(cls, vocab: Vocab, ids: Sequence[int], logprob: float, complete: bool = True) -> Candidate:
        tokens = tuple(vocab.token_of(i) for i in ids)
        smiles = detokenize(vocab.decode(ids))
        return cls(smiles, logprob, tuple(ids), tokens, complete)


def _allowed(vocab: Vocab) -> np.ndarray:
    # the decoder never proposes PAD, BOS or UNK
    return np.array([vocab.eos_id, *range(len(RESERVED), len(vocab))], dtype=np.int64)


def _score_many(model: DecoderModel, onbits: Sequence[int], prefixes: list[tuple[int, ...]]) -> np.ndarray:
    batch = getattr(model, "score_next_batch", None)
    if batch is not None:
        return np.asarray(batch(onbits, prefixes), dtype=np.float64)
    return np.stack([np.asarray(model.score_next(onbits, p), dtype=np.float64) for p in prefixes])


def beam_search(
    model: DecoderModel,
    onbits: Sequence[int],
    beam: int = 10,
    max_len: int = 160,
    dedup: bool = True,
) -> list[Candidate]:
    """Top-``beam`` completed sequences by summed log-probability.

    ``max_len`` bounds the content tokens, so a sequence ends with EOS at step
    ``max_len + 1`` at the latest. Equal scores are ordered by token ids. With
    ``dedup`` candidates that canonicalize to the same structure keep only the
    best-scoring one; unparseable strings are compared verbatim.
    """
    if beam < 1:
        raise ValueError("beam must be at least 1")
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    vocab = model.vocab
    allowed = _allowed(vocab)
    eos_only = np.array([vocab.eos_id], dtype=np.int64)
    live: list[tuple[float, tuple[int, ...]]] = [(0.0, (vocab.bos_id,))]
    finished: list[tuple[float, tuple[int, ...]]] = []
    best_open = live[0]
    for step in range(max_len + 1):
        choices = eos_only if step == max_len else allowed
        rows = _score_many(model, onbits, [ids for _, ids in live])
        expansions = [
            (score + float(row[t]), ids + (int(t),))
            for (score, ids), row in zip(live, rows)
            for t in choices
            if row[t] > -math.inf  # zero-probability continuations are impossible, not just unlikely
        ]
        expansions.sort(key=lambda e: (-e[0], e[1]))
        live = []
        for score, ids in expansions:
            if ids[-1] == vocab.eos_id:
                finished.append((score, ids))
            else:
                live.append((score, ids))
                if len(live) == beam:
                    break
        finished.sort(key=lambda e: (-e[0], e[1]))
        if not live:
            break
        best_open = live[0]
        # scores only fall as sequences grow, so once the beam is full of
        # finished sequences no live one can overtake them
        ranked = _distinct(vocab, finished, dedup)
        if len(ranked) >= beam and live[0][0] <= ranked[beam - 1][0]:
            break
    if not finished:
        score, ids = best_open
        return [Candidate.from_ids(vocab, ids, score, complete=False)]
    out = _distinct(vocab, finished, dedup)[:beam]
    return [Candidate.from_ids(vocab, ids, score) for score, ids in out]


def _key(vocab: Vocab, ids: tuple[int, ...]) -> str:
    text = detokenize(vocab.decode(ids))
    canon = canonical_smiles(text)
    return canon if canon is not None else "\0" + text


def _distinct(vocab: Vocab, ranked: list[tuple[float, tuple[int, ...]]], dedup: bool):
    if not dedup:
        return ranked
    seen: set[str] = set()
    out = []
    for score, ids in ranked:
        key = _key(vocab, ids)
        if key not in seen:
            seen.add(key)
            out.append((score, ids))
    return out


def greedy_decode(model: DecoderModel, onbits: Sequence[int], max_len: int = 160) -> Candidate:
    """Argmax decoding; ties resolve to the smallest token id."""
    vocab = model.vocab
    allowed = _allowed(vocab)
    ids: tuple[int, ...] = (vocab.bos_id,)
    score = 0.0
    for step in range(max_len + 1):
        row = np.asarray(model.score_next(onbits, ids), dtype=np.float64)
        if step == max_len:
            best = vocab.eos_id
        else:
            best = int(allowed[np.argmax(row[allowed])])  # argmax keeps the first maximum
        score += float(row[best])
        ids += (best,)
        if best == vocab.eos_id:
            break
    return Candidate.from_ids(vocab, ids, score)


def rescore(model: DecoderModel, onbits: Sequence[int], ids: Sequence[int]) -> float:
    """Sum of per-step log-probabilities of ``ids`` (BOS first) under ``model``."""
    return math.fsum(float(model.score_next(onbits, tuple(ids[:i]))[ids[i]]) for i in range(1, len(ids)))
