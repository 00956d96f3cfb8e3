"""Command-line entry point: fingerprint, train, decode, evaluate.

Option values resolve in the order command-line flag, ``FP2MOL_<OPTION>``
environment variable, ``--config`` JSON file section for the subcommand, then
built-in default. Each command writes ``<output>.manifest.json`` next to its
main output with digests of every file read and written.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .decoder import (
    ModelFormatError,
    ToyTransformerParams,
    TrainConfig,
    TrainingError,
    beam_search,
    load_model,
    save_model,
    train,
)
from .evaluation import EvalConfig, EvaluationError, evaluate_run
from .fingerprint import (
    DEFAULT_RADIUS,
    DEFAULT_WIDTH,
    GENERATOR_ID,
    fingerprint_to_onbits,
    format_fingerprint_record,
    morgan_fingerprint,
    read_fingerprint_records,
)
from .mces import McesConfig
from .smiles import SmilesError, parse_smiles, read_corpus, tokenize_smiles, write_smiles

__all__ = ["main", "DataError", "UsageError"]

logger = logging.getLogger("fp2mol")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ENV_PREFIX = "FP2MOL_"
UNKNOWN_GENERATOR = "unknown"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        raise UsageError(message)


@dataclass(frozen=True)
class _Opt:
    name: str
    kind: Callable[[str], Any]
    default: Any
    help: str


def _ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(k) for k in str(text).split(","))
    except ValueError:
        raise UsageError(f"--k expects comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise UsageError("--k values must be positive")
    return ks


def _optional_float(text: str) -> float | None:
    return None if text in (None, "", "none") else float(text)


def _optional_int(text: str) -> int | None:
    return None if text in (None, "", "none") else int(text)


_COMMON = [_Opt("jobs", int, 1, "worker processes for per-example work")]

_OPTIONS: dict[str, list[_Opt]] = {
    "fingerprint": [
        _Opt("radius", int, DEFAULT_RADIUS, "Morgan radius"),
        _Opt("width", int, DEFAULT_WIDTH, "fingerprint width in bits"),
    ],
    "train": [
        _Opt("lr", float, 5e-4, "Adam learning rate"),
        _Opt("batch", int, 128, "batch size"),
        _Opt("epochs", int, 6, "training epochs"),
        _Opt("seed", int, 0, "random seed"),
        _Opt("stop_loss", _optional_float, None, "stop once an epoch's mean loss is below this"),
        _Opt("threshold", float, 0.5, "threshold for probability fingerprint records"),
        _Opt("embed_dim", int, 128, "model width"),
        _Opt("layers", int, 2, "encoder and decoder layers"),
        _Opt("heads", int, 4, "attention heads"),
        _Opt("ff_dim", int, 256, "feed-forward width"),
        _Opt("max_onbits", int, 512, "on-bits kept per fingerprint"),
        _Opt("max_tokens", int, 160, "longest SMILES in tokens"),
    ],
    "decode": [
        _Opt("threshold", float, 0.5, "probability threshold for on-bits (inclusive)"),
        _Opt("beam", int, 10, "beam width"),
        _Opt("max_len", int, 160, "longest decoded SMILES in tokens"),
        _Opt("fp_generator", str, None, "generator id for fingerprint files without a manifest"),
    ],
    "evaluate": [
        _Opt("k", _ks, (1, 10), "comma-separated k values"),
        _Opt("mces_penalty", float, 100.0, "MCES when no candidate parses"),
        _Opt("bond_match", str, "strict-order", "strict-order or any-order"),
        _Opt("mces_time_budget", float, 5.0, "seconds per MCES pair"),
        _Opt("mces_max_nodes", _optional_int, None, "search-node cap per MCES pair (deterministic)"),
        _Opt("max_nodes_exact", int, 20, "largest heavy-atom count reported exact"),
    ],
}

_POSITIONALS = {
    "fingerprint": [("corpus", "SMILES corpus (<id>\\t<smiles> per line)"), ("out", "on-bit records (JSON lines)")],
    "train": [
        ("corpus", "SMILES corpus"),
        ("fingerprints", "fingerprint records joined to the corpus on id"),
        ("out_model", "model file to write"),
    ],
    "decode": [
        ("model", "model file"),
        ("fingerprints", "probability or on-bit fingerprint records"),
        ("out", "predictions (JSON lines)"),
    ],
    "evaluate": [
        ("predictions", "predictions (JSON lines)"),
        ("truth", "SMILES corpus with the true structures"),
        ("out", "report JSON; a TSV of aggregates is written beside it"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fp2mol", description="Fingerprint-to-structure toolkit.")
    parser.add_argument("--version", action="version", version=f"fp2mol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, opts in _OPTIONS.items():
        p = sub.add_parser(command)
        for name, help_text in _POSITIONALS[command]:
            p.add_argument(name, help=help_text)
        p.add_argument("--config", help="JSON file with a section per subcommand")
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.add_argument("-q", "--quiet", action="store_true")
        for opt in opts + _COMMON:
            flag = "--" + opt.name.replace("_", "-")
            p.add_argument(flag, dest=opt.name, default=None, help=f"{opt.help} (default {opt.default})")
    return parser


def resolve_options(command: str, args: argparse.Namespace, env: dict[str, str] | None = None) -> dict[str, Any]:
    """Apply flag > environment > config file > default precedence."""
    env = os.environ if env is None else env
    section: dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise DataError("config must be a JSON object")
        section = data.get(command, {})
        if not isinstance(section, dict):
            raise DataError(f"config section {command!r} must be an object")
    opts = _OPTIONS[command] + _COMMON
    known = {o.name for o in opts}
    unknown = {k.replace("-", "_") for k in section} - known
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    section = {k.replace("-", "_"): v for k, v in section.items()}
    out: dict[str, Any] = {}
    for opt in opts:
        raw: Any = getattr(args, opt.name)
        if raw is None:
            raw = env.get(ENV_PREFIX + opt.name.upper())
        if raw is None and opt.name in section:
            raw = section[opt.name]
            if isinstance(raw, list):
                raw = ",".join(str(x) for x in raw)
        if raw is None:
            out[opt.name] = opt.default
            continue
        try:
            out[opt.name] = opt.kind(raw) if isinstance(raw, str) else opt.kind(str(raw))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {opt.name}: {raw!r} ({exc})") from None
    if out["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    return out


# ------------------------------------------------------------------ files


def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_text(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def write_atomic(path: str | Path, data: bytes | str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def _write_manifest(
    command: str,
    options: dict[str, Any],
    inputs: Sequence[str],
    outputs: Sequence[str],
    extra: dict[str, Any],
    started: datetime.datetime,
) -> None:
    manifest = {
        "tool": "fp2mol",
        "version": __version__,
        "command": command,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in options.items()},
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
        "started": started.isoformat(),
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        **extra,
    }
    write_atomic(manifest_path(outputs[0]), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def fingerprint_generator(path: str, declared: str | None = None) -> str:
    """Generator id of a fingerprint file, taken from its manifest sidecar."""
    sidecar = manifest_path(path)
    if sidecar.exists():
        try:
            recorded = json.loads(sidecar.read_text(encoding="utf-8")).get("generator_id")
        except (OSError, json.JSONDecodeError, AttributeError) as exc:
            raise DataError(f"unreadable manifest {sidecar}: {exc}") from exc
        if recorded:
            if declared and declared != recorded:
                raise DataError(f"{path}: manifest says generator {recorded!r}, flag says {declared!r}")
            return str(recorded)
    return declared or UNKNOWN_GENERATOR


def _read_fingerprints(path: str, threshold: float) -> tuple[list[tuple[str, int, tuple[int, ...]]], int]:
    """Records as (id, width, on-bits) plus the number of malformed lines."""
    records = []
    bad = 0
    for _, rec in read_fingerprint_records(_read_text(path)):
        if isinstance(rec, ValueError):
            logger.warning("%s: %s", path, rec)
            bad += 1
            continue
        records.append((rec.id, rec.width, rec.to_onbits(threshold)))
    return records, bad


def _pool_map(fn: Callable, items: list, jobs: int, initializer: Callable | None = None, initargs: tuple = ()) -> list:
    if jobs <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ------------------------------------------------------------------ commands


def _fingerprint_line(args: tuple[str, str, int, int]) -> str | None:
    ident, smiles, radius, width = args
    try:
        mol = parse_smiles(smiles)
    except (SmilesError, ValueError):
        return None
    return format_fingerprint_record(ident, fingerprint_to_onbits(morgan_fingerprint(mol, radius, width)), width)


def cmd_fingerprint(args: argparse.Namespace, opts: dict[str, Any]) -> int:
    if opts["radius"] < 0 or opts["width"] < 1:
        raise UsageError("radius must be >= 0 and width >= 1")
    started = datetime.datetime.now(datetime.timezone.utc)
    entries = list(read_corpus(_read_text(args.corpus)))
    work = [(e.id, e.smiles, opts["radius"], opts["width"]) for e in entries]
    lines = _pool_map(_fingerprint_line, work, opts["jobs"])
    out, warnings = [], 0
    for entry, line in zip(entries, lines):
        if line is None:
            warnings += 1
            logger.warning("%s line %d: cannot parse SMILES %r", args.corpus, entry.lineno, entry.smiles)
        else:
            out.append(line)
    write_atomic(args.out, "".join(line + "\n" for line in out))
    logger.info("wrote %d fingerprint records, %d warnings", len(out), warnings)
    _write_manifest(
        "fingerprint", opts, [args.corpus], [args.out],
        {"generator_id": GENERATOR_ID, "records": len(out), "warnings": warnings}, started,
    )
    return EXIT_OK


def load_training_pairs(corpus_path: str, fp_path: str, threshold: float):
    """Join corpus SMILES (as canonical tokens) with fingerprint on-bits by id."""
    smiles: dict[str, str] = {}
    for entry in read_corpus(_read_text(corpus_path)):
        try:
            canon = write_smiles(parse_smiles(entry.smiles), canonical=True)
        except (SmilesError, ValueError) as exc:
            logger.warning("%s line %d: skipped (%s)", corpus_path, entry.lineno, exc)
            continue
        if entry.id in smiles:
            raise DataError(f"{corpus_path} line {entry.lineno}: duplicate id {entry.id!r}")
        smiles[entry.id] = canon
    records, _ = _read_fingerprints(fp_path, threshold)
    widths = {w for _, w, _ in records}
    if len(widths) > 1:
        raise DataError(f"{fp_path}: mixed fingerprint widths {sorted(widths)}")
    pairs = [(onbits, tokenize_smiles(smiles[i])) for i, _, onbits in records if i in smiles]
    ids = [i for i, _, _ in records if i in smiles]
    return pairs, ids, (widths.pop() if widths else None)


def cmd_train(args: argparse.Namespace, opts: dict[str, Any]) -> int:
    if opts["epochs"] < 1:
        raise UsageError("--epochs must be at least 1 (nothing to train)")
    started = datetime.datetime.now(datetime.timezone.utc)
    generator = fingerprint_generator(args.fingerprints)
    pairs, ids, width = load_training_pairs(args.corpus, args.fingerprints, opts["threshold"])
    if not pairs:
        raise DataError("joining corpus and fingerprints produced zero pairs")
    try:
        params = ToyTransformerParams(
            embed_dim=opts["embed_dim"], layers=opts["layers"], heads=opts["heads"],
            feedforward_dim=opts["ff_dim"], max_onbits=opts["max_onbits"], max_tokens=opts["max_tokens"],
        )
        cfg = TrainConfig(
            learning_rate=opts["lr"], batch_size=opts["batch"], epochs=opts["epochs"],
            seed=opts["seed"], stop_loss=opts["stop_loss"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        model = train(params, pairs, cfg, width)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model.meta = {"fingerprint_generator": generator, "seed": str(opts["seed"])}
    blob = save_model(model)
    write_atomic(args.out_model, blob)
    loss_log = str(args.out_model) + ".loss.tsv"
    write_atomic(loss_log, "epoch\tloss\n" + "".join(f"{e}\t{v!r}\n" for e, v in enumerate(model.loss_history)))
    logger.info("trained on %d pairs; final loss %.6f", len(pairs), model.loss_history[-1])
    _write_manifest(
        "train", opts, [args.corpus, args.fingerprints], [args.out_model, loss_log],
        {
            "generator_id": generator,
            "vocab_sha256": model.vocab.digest,
            "model_sha256": hashlib.sha256(blob).hexdigest(),
            "seed": opts["seed"],
            "pairs": len(pairs),
        },
        started,
    )
    return EXIT_OK


_WORKER_MODEL = None


def _init_decoder(blob: bytes) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = load_model(blob)


def _decode_one(args: tuple[str, tuple[int, ...], int, int]) -> tuple[str, list[tuple[str, float]]]:
    ident, onbits, beam, max_len = args
    cands = beam_search(_WORKER_MODEL, onbits, beam=beam, max_len=max_len)
    return ident, [(c.smiles, c.logprob) for c in cands]


def decode_predictions(model_blob: bytes, records, beam: int, max_len: int, jobs: int = 1) -> list[str]:
    """Beam-search every (id, on-bits) record into predictions lines."""
    work = [(ident, onbits, beam, max_len) for ident, onbits in records]
    results = _pool_map(_decode_one, work, jobs, _init_decoder, (model_blob,))
    lines = []
    for ident, cands in results:
        body = {"id": ident, "candidates": [{"smiles": s, "logprob": lp} for s, lp in cands]}
        lines.append(json.dumps(body, separators=(",", ":")))
    return lines


def cmd_decode(args: argparse.Namespace, opts: dict[str, Any]) -> int:
    if opts["beam"] < 1 or opts["max_len"] < 0:
        raise UsageError("--beam must be >= 1 and --max-len >= 0")
    started = datetime.datetime.now(datetime.timezone.utc)
    blob = _read_bytes(args.model)
    try:
        model = load_model(blob)
    except ModelFormatError as exc:
        raise DataError(f"{args.model}: {exc}") from exc
    trained_on = model.meta.get("fingerprint_generator", UNKNOWN_GENERATOR)
    generator = fingerprint_generator(args.fingerprints, opts["fp_generator"])
    if UNKNOWN_GENERATOR in (trained_on, generator):
        logger.warning("fingerprint provenance unknown (model: %s, input: %s)", trained_on, generator)
    elif trained_on != generator:
        raise DataError(
            f"fingerprint provenance mismatch: model trained on {trained_on!r} bits, "
            f"input uses {generator!r}; bit spaces of different generators are not interchangeable"
        )
    records, bad = _read_fingerprints(args.fingerprints, opts["threshold"])
    if bad:
        raise DataError(f"{args.fingerprints}: {bad} malformed record(s)")
    for ident, width, _ in records:
        if width != model.width:
            raise DataError(
                f"record {ident!r} is {width}-bit but the model expects {model.width}-bit fingerprints; "
                "fingerprints must come from the generator the model was trained on"
            )
    lines = decode_predictions(blob, [(i, b) for i, _, b in records], opts["beam"], opts["max_len"], opts["jobs"])
    write_atomic(args.out, "".join(line + "\n" for line in lines))
    valid_total = 0.0
    for line in lines:
        rec = json.loads(line)
        cands = rec["candidates"]
        valid = sum(_parses(c["smiles"]) for c in cands) / len(cands) if cands else 0.0
        valid_total += valid
        logger.info("%s: %d candidates, validity %.3f", rec["id"], len(cands), valid)
    if lines:
        logger.info("mean validity rate %.4f over %d examples", valid_total / len(lines), len(lines))
    _write_manifest(
        "decode", opts, [args.model, args.fingerprints], [args.out],
        {"generator_id": generator, "vocab_sha256": model.vocab.digest, "model_sha256": hashlib.sha256(blob).hexdigest()},
        started,
    )
    return EXIT_OK


def _parses(smiles: str) -> bool:
    try:
        parse_smiles(smiles)
    except (SmilesError, ValueError):
        return False
    return True


def cmd_evaluate(args: argparse.Namespace, opts: dict[str, Any]) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    truth: dict[str, str] = {}
    for entry in read_corpus(_read_text(args.truth)):
        if entry.id in truth:
            raise DataError(f"{args.truth} line {entry.lineno}: duplicate id {entry.id!r}")
        truth[entry.id] = entry.smiles
    try:
        mces = McesConfig(
            bond_match=opts["bond_match"], max_nodes_exact=opts["max_nodes_exact"],
            time_budget=opts["mces_time_budget"], max_search_nodes=opts["mces_max_nodes"],
        )
        cfg = EvalConfig(ks=opts["k"], mces=mces, mces_penalty=opts["mces_penalty"], jobs=opts["jobs"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        report = evaluate_run(_read_text(args.predictions), truth, cfg)
    except EvaluationError as exc:
        raise DataError(str(exc)) from exc
    for problem in report.problems:
        logger.warning("%s: %s", args.predictions, problem)
    for r in report.per_example:
        if r.error:
            logger.warning("%s: %s", args.predictions, r.error)
    tsv = str(Path(args.out).with_suffix(".tsv"))
    write_atomic(args.out, report.to_json())
    write_atomic(tsv, report.to_tsv())
    if not args.quiet:
        sys.stdout.write(report.to_tsv())
    _write_manifest("evaluate", opts, [args.predictions, args.truth], [args.out, tsv], {}, started)
    return EXIT_OK


_COMMANDS = {"fingerprint": cmd_fingerprint, "train": cmd_train, "decode": cmd_decode, "evaluate": cmd_evaluate}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"fp2mol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("fp2mol")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
    try:
        opts = resolve_options(args.command, args)
        return _COMMANDS[args.command](args, opts)
    except UsageError as exc:
        print(f"fp2mol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TrainingError) as exc:
        print(f"fp2mol: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"fp2mol: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
