"""Top-k structure-recovery metrics: exact match, MCES distance, Tanimoto.

Every metric looks at the same window: the first k candidates, of which the
unparseable ones are ignored. A hit at k therefore always coincides with an
MCES of 0 and a Tanimoto of 1.0 at the same k.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .fingerprint import DEFAULT_RADIUS, DEFAULT_WIDTH, morgan_fingerprint, tanimoto
from .mces import McesConfig, mces_distance
from .molgraph import Molecule
from .smiles import SmilesError, parse_smiles, write_smiles

__all__ = [
    "DEFAULT_KS",
    "DEFAULT_MCES_PENALTY",
    "EvalConfig",
    "EvaluationError",
    "ExampleResult",
    "MetricsReport",
    "parse_prediction_line",
    "topk_accuracy",
    "topk_mces",
    "topk_tanimoto",
    "evaluate_example",
    "evaluate_run",
]

DEFAULT_KS = (1, 10)
DEFAULT_MCES_PENALTY = 100.0


class EvaluationError(ValueError):
    """Structural input problem that makes the whole run meaningless."""


@dataclass(frozen=True)
class EvalConfig:
    ks: tuple[int, ...] = DEFAULT_KS
    mces: McesConfig = field(default_factory=McesConfig)
    mces_penalty: float = DEFAULT_MCES_PENALTY
    radius: int = DEFAULT_RADIUS
    width: int = DEFAULT_WIDTH
    jobs: int = 1

    def __post_init__(self) -> None:
        ks = tuple(sorted(set(int(k) for k in self.ks)))
        if not ks or ks[0] < 1:
            raise ValueError("ks must be a non-empty set of positive integers")
        object.__setattr__(self, "ks", ks)
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    def to_json(self) -> dict:
        out = asdict(self)
        out["ks"] = list(self.ks)
        del out["jobs"]  # does not affect results
        return out


def _smiles_of(candidate: object) -> str:
    return candidate if isinstance(candidate, str) else candidate.smiles


def _parse(smiles: str) -> Molecule | None:
    try:
        return parse_smiles(smiles)
    except (SmilesError, ValueError):
        return None


def _window(candidates: Sequence[object], k: int) -> list[Molecule]:
    mols = (_parse(_smiles_of(c)) for c in candidates[:k])
    return [m for m in mols if m is not None]


def topk_accuracy(candidates: Sequence[object], truth: Molecule, k: int) -> bool:
    """True when one of the first ``k`` candidates is the truth structure."""
    key = write_smiles(truth, canonical=True)
    return any(write_smiles(m, canonical=True) == key for m in _window(candidates, k))


def topk_mces(candidates: Sequence[object], truth: Molecule, k: int, cfg: McesConfig | None = None,
              penalty: float = DEFAULT_MCES_PENALTY) -> float:
    dists = [mces_distance(truth, m, cfg).distance for m in _window(candidates, k)]
    return float(min(dists)) if dists else float(penalty)


def topk_tanimoto(candidates: Sequence[object], truth: Molecule, k: int,
                  radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH) -> float:
    ref = morgan_fingerprint(truth, radius, width)
    sims = [tanimoto(ref, morgan_fingerprint(m, radius, width)) for m in _window(candidates, k)]
    return max(sims) if sims else 0.0


@dataclass(frozen=True)
class ExampleResult:
    id: str
    hits: dict[int, bool]
    mces_best: dict[int, float]
    tanimoto_best: dict[int, float]
    candidate_count: int
    validity_rate: float
    mces_exact: bool = True
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "hit": {str(k): v for k, v in self.hits.items()},
            "mces": {str(k): v for k, v in self.mces_best.items()},
            "tanimoto": {str(k): v for k, v in self.tanimoto_best.items()},
            "candidate_count": self.candidate_count,
            "validity_rate": self.validity_rate,
            "mces_exact": self.mces_exact,
            "error": self.error,
        }


def evaluate_example(ident: str, candidates: Sequence[object], truth: Molecule, cfg: EvalConfig) -> ExampleResult:
    """All metrics at every configured k, computing each pair only once."""
    smiles = [_smiles_of(c) for c in candidates]
    mols = [_parse(s) for s in smiles]
    parsed = sum(m is not None for m in mols)
    key = write_smiles(truth, canonical=True)
    ref = morgan_fingerprint(truth, cfg.radius, cfg.width)
    hits: dict[int, bool] = {}
    mces: dict[int, float] = {}
    tani: dict[int, float] = {}
    hit, dist, sim = False, math.inf, 0.0
    exact = True
    done = 0
    for k in cfg.ks:
        for m in mols[done:k]:
            if m is None:
                continue
            hit = hit or write_smiles(m, canonical=True) == key
            result = mces_distance(truth, m, cfg.mces)
            exact = exact and result.exact
            dist = min(dist, result.distance)
            sim = max(sim, tanimoto(ref, morgan_fingerprint(m, cfg.radius, cfg.width)))
        done = max(done, k)
        hits[k] = hit
        mces[k] = float(dist) if math.isfinite(dist) else float(cfg.mces_penalty)
        tani[k] = sim
    validity = parsed / len(mols) if mols else 0.0
    return ExampleResult(ident, hits, mces, tani, len(mols), validity, exact)


def _failed(ident: str, cfg: EvalConfig, message: str) -> ExampleResult:
    return ExampleResult(
        ident,
        {k: False for k in cfg.ks},
        {k: float(cfg.mces_penalty) for k in cfg.ks},
        {k: 0.0 for k in cfg.ks},
        0,
        0.0,
        True,
        message,
    )


@dataclass(frozen=True)
class MetricsReport:
    config: EvalConfig
    per_example: tuple[ExampleResult, ...]
    problems: tuple[str, ...] = ()  # malformed lines that could not be tied to an example

    def aggregate(self) -> dict:
        n = len(self.per_example)
        out: dict = {
            "examples": n,
            "failed": sum(r.error is not None for r in self.per_example),
            "validity_rate": math.fsum(r.validity_rate for r in self.per_example) / n if n else 0.0,
            "mces_exact_examples": sum(r.mces_exact for r in self.per_example),
        }
        for k in self.config.ks:
            out[f"top{k}"] = {
                "accuracy": sum(r.hits[k] for r in self.per_example) / n if n else 0.0,
                "mces": math.fsum(r.mces_best[k] for r in self.per_example) / n if n else 0.0,
                "tanimoto": math.fsum(r.tanimoto_best[k] for r in self.per_example) / n if n else 0.0,
            }
        return out

    def to_json(self) -> str:
        body = {
            "config": self.config.to_json(),
            "per_example": [r.to_json() for r in self.per_example],
            "aggregate": self.aggregate(),
            "problems": list(self.problems),
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def to_tsv(self) -> str:
        agg = self.aggregate()
        lines = ["k\taccuracy\tmces\ttanimoto\texamples"]
        for k in self.config.ks:
            row = agg[f"top{k}"]
            lines.append(f"{k}\t{row['accuracy']!r}\t{row['mces']!r}\t{row['tanimoto']!r}\t{agg['examples']}")
        return "\n".join(lines) + "\n"


def parse_prediction_line(line: str) -> tuple[str, list[str]]:
    """Decode one predictions record into (id, candidate SMILES by rank)."""
    obj = json.loads(line)
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
        raise ValueError('prediction must be an object with a string "id"')
    cands = obj.get("candidates")
    if not isinstance(cands, list):
        raise ValueError('prediction needs a "candidates" list')
    smiles, scores = [], []
    for c in cands:
        if not isinstance(c, dict) or not isinstance(c.get("smiles"), str):
            raise ValueError('each candidate needs a string "smiles"')
        lp = c.get("logprob")
        if isinstance(lp, bool) or not isinstance(lp, (int, float)):
            raise ValueError('each candidate needs a numeric "logprob"')
        smiles.append(c["smiles"])
        scores.append(float(lp))
    if any(b > a for a, b in zip(scores, scores[1:])):
        raise ValueError("candidates are not sorted by logprob")
    return obj["id"], smiles


def _job(args: tuple[str, list[str], str, EvalConfig]) -> ExampleResult:
    ident, smiles, truth, cfg = args
    return evaluate_example(ident, smiles, parse_smiles(truth), cfg)


def _loose_id(line: str) -> str | None:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    ident = obj.get("id") if isinstance(obj, dict) else None
    return ident if isinstance(ident, str) else None


def evaluate_run(predictions: Iterable[str], truth: Mapping[str, str], cfg: EvalConfig | None = None) -> MetricsReport:
    """Score a JSON-lines predictions stream against ``truth`` (id -> SMILES).

    Unknown or repeated ids raise EvaluationError. A malformed line is
    recorded with its line number; when its id is still readable the example
    is kept as failed with worst-case scores.
    """
    cfg = cfg or EvalConfig()
    jobs: list[tuple[str, list[str], str, EvalConfig]] = []
    failed: list[ExampleResult] = []
    problems: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(predictions, start=1):
        if not line.strip():
            continue
        try:
            ident, smiles = parse_prediction_line(line)
        except (ValueError, TypeError) as exc:
            message = f"line {lineno}: {exc}"
            ident = _loose_id(line)
            if ident is None or ident not in truth or ident in seen:
                problems.append(message)
            else:
                seen.add(ident)
                failed.append(_failed(ident, cfg, message))
            continue
        if ident not in truth:
            raise EvaluationError(f"line {lineno}: id {ident!r} is not in the truth corpus")
        if ident in seen:
            raise EvaluationError(f"line {lineno}: duplicate id {ident!r}")
        seen.add(ident)
        jobs.append((ident, smiles, truth[ident], cfg))
    for text in sorted({j[2] for j in jobs}):
        if _parse(text) is None:
            raise EvaluationError(f"truth SMILES {text!r} does not parse")
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.jobs))))
    else:
        results = [_job(j) for j in jobs]
    ordered = tuple(sorted(results + failed, key=lambda r: r.id))
    return MetricsReport(cfg, ordered, tuple(problems))
