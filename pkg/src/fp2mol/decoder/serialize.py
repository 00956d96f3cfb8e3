"""Versioned binary container for toy decoder weights.

Layout: 8-byte magic, u32 format version, u32 header length, UTF-8 JSON
header, then the float32 tensors in header order, little-endian. The header
carries the vocabulary, its digest, the fingerprint width, the architecture,
a digest of the tensor payload and free-form string metadata.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np
import torch

from ..smiles.tokens import Vocab
from .model import ToyTransformer, ToyTransformerParams, _Net

__all__ = ["MAGIC", "FORMAT_VERSION", "ModelFormatError", "save_model", "load_model"]

MAGIC = b"FP2MOLDM"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sII")


class ModelFormatError(ValueError):
    pass


def save_model(model: ToyTransformer) -> bytes:
    state = model.net.state_dict()
    entries = []
    blobs = []
    for name in sorted(state):
        arr = state[name].detach().cpu().numpy().astype("<f4")
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes(order="C"))
    payload = b"".join(blobs)
    header = {
        "vocab": list(model.vocab.tokens),
        "vocab_sha256": model.vocab.digest,
        "width": model.width,
        "params": asdict(model.params),
        "tensors": entries,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "meta": dict(sorted(model.meta.items())),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(head)) + head + payload


def load_model(data: bytes, vocab: Vocab | None = None, width: int | None = None) -> ToyTransformer:
    """Rebuild a model; ``vocab``/``width``, when given, must match the file."""
    if len(data) < _PREAMBLE.size:
        raise ModelFormatError("model file is truncated")
    magic, version, head_len = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a decoder model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    start = _PREAMBLE.size
    try:
        header = json.loads(data[start : start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from exc
    if not isinstance(header, dict):
        raise ModelFormatError("corrupt model header")
    missing = {"vocab", "vocab_sha256", "width", "params", "tensors", "payload_sha256"} - set(header)
    if missing:
        raise ModelFormatError(f"model header lacks {sorted(missing)}")
    payload = data[start + head_len :]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ModelFormatError("weight payload digest mismatch")
    file_vocab = Vocab(tuple(header["vocab"]))
    if file_vocab.digest != header["vocab_sha256"]:
        raise ModelFormatError("vocabulary digest mismatch")
    if vocab is not None and vocab.digest != file_vocab.digest:
        raise ModelFormatError("model vocabulary differs from the expected vocabulary")
    if width is not None and width != header["width"]:
        raise ModelFormatError(f"model expects {header['width']}-bit fingerprints, got {width}")
    params = ToyTransformerParams(**header["params"])
    net = _Net(params, header["width"], len(file_vocab))
    state = {}
    offset = 0
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float32))
        offset += 4 * count
    if offset != len(payload):
        raise ModelFormatError("weight payload size does not match the header")
    try:
        net.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise ModelFormatError(f"weights do not fit the architecture: {exc}") from exc
    model = ToyTransformer(params, file_vocab, header["width"], net)
    model.meta = {str(k): str(v) for k, v in header.get("meta", {}).items()}
    return model
