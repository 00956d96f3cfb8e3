"""Decoder interface and the reference toy encoder-decoder transformer."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import torch
from torch import nn

from ..smiles.tokens import Vocab

__all__ = [
    "DecoderModel",
    "ToyTransformerParams",
    "ToyTransformer",
    "TableModel",
    "score_next",
    "prefix_ids",
]

logger = logging.getLogger(__name__)


@runtime_checkable
class DecoderModel(Protocol):
    """Anything that scores the next token given on-bits and a token-id prefix."""

    vocab: Vocab
    width: int

    def score_next(self, onbits: Sequence[int], prefix: Sequence[int]) -> np.ndarray:
        """Float64 log-probabilities over the whole vocabulary."""
        ...


def prefix_ids(vocab: Vocab, prefix: Sequence[int] | Sequence[str]) -> list[int]:
    """Token ids for a prefix given as ids or as token strings; must start with BOS."""
    ids = [vocab.id_of(t) if isinstance(t, str) else int(t) for t in prefix]
    if not ids or ids[0] != vocab.bos_id:
        raise ValueError("prefix must begin with BOS")
    for i in ids:
        if not 0 <= i < len(vocab):
            raise IndexError(f"token id {i} outside vocabulary of size {len(vocab)}")
    return ids


def score_next(model: DecoderModel, onbits: Sequence[int], prefix: Sequence[int] | Sequence[str]) -> np.ndarray:
    return model.score_next(onbits, prefix_ids(model.vocab, prefix))


@dataclass(frozen=True)
class ToyTransformerParams:
    embed_dim: int = 128
    layers: int = 2
    heads: int = 4
    feedforward_dim: int = 256
    max_onbits: int = 512
    max_tokens: int = 160  # content tokens, excluding BOS/EOS

    def __post_init__(self) -> None:
        for name in ("embed_dim", "layers", "heads", "feedforward_dim", "max_onbits", "max_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")


def _sinusoid(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    freq = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(pos * freq)
    table[:, 1::2] = torch.cos(pos * freq)[:, : dim // 2]
    return table


class _Net(nn.Module):
    """On-bit set encoder and causal SMILES-token decoder."""

    def __init__(self, params: ToyTransformerParams, width: int, vocab_size: int):
        super().__init__()
        d = params.embed_dim
        # index `width` is an always-present null bit so empty on-bit sets still
        # give the decoder something to attend to; `width + 1` is padding
        self.null_bit = width
        self.pad_bit = width + 1
        self.bit_embed = nn.Embedding(width + 2, d, padding_idx=self.pad_bit)
        self.tok_embed = nn.Embedding(vocab_size, d, padding_idx=Vocab.pad_id)
        enc_layer = nn.TransformerEncoderLayer(
            d, params.heads, params.feedforward_dim, dropout=0.0, activation="gelu", batch_first=True
        )
        dec_layer = nn.TransformerDecoderLayer(
            d, params.heads, params.feedforward_dim, dropout=0.0, activation="gelu", batch_first=True
        )
        self.encoder = nn.TransformerEncoder(enc_layer, params.layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(dec_layer, params.layers)
        self.out = nn.Linear(d, vocab_size)
        self.register_buffer("positions", _sinusoid(params.max_tokens + 1, d).float(), persistent=False)

    def encode(self, bits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mask = bits == self.pad_bit
        return self.encoder(self.bit_embed(bits), src_key_padding_mask=mask), mask

    def decode(self, memory: torch.Tensor, memory_mask: torch.Tensor, inp: torch.Tensor) -> torch.Tensor:
        length = inp.shape[1]
        x = self.tok_embed(inp) + self.positions[:length].to(memory.dtype)
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)
        h = self.decoder(
            x,
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=inp == Vocab.pad_id,
            memory_key_padding_mask=memory_mask,
        )
        return self.out(h)

    def forward(self, bits: torch.Tensor, inp: torch.Tensor) -> torch.Tensor:
        memory, mask = self.encode(bits)
        return self.decode(memory, mask, inp)


def bit_rows(onbit_sets: Sequence[Sequence[int]], width: int) -> torch.Tensor:
    """Pad on-bit sets into a batch, each row led by the null bit."""
    longest = max(len(s) for s in onbit_sets) + 1
    rows = torch.full((len(onbit_sets), longest), width + 1, dtype=torch.long)
    for r, s in enumerate(onbit_sets):
        rows[r, 0] = width
        if s:
            rows[r, 1 : len(s) + 1] = torch.as_tensor(list(s), dtype=torch.long)
    return rows


class ToyTransformer:
    """Reference decoder: float32 weights for training, float64 inference."""

    def __init__(self, params: ToyTransformerParams, vocab: Vocab, width: int, net: _Net | None = None):
        if width < 1:
            raise ValueError("width must be positive")
        self.params = params
        self.vocab = vocab
        self.width = width
        self.net = net if net is not None else _Net(params, width, len(vocab))
        self.loss_history: list[float] = []
        self.meta: dict[str, str] = {}  # free-form provenance, stored in the model file
        self._infer: _Net | None = None
        self._memo: tuple[tuple[int, ...], torch.Tensor, torch.Tensor] | None = None

    def invalidate(self) -> None:
        """Drop inference caches after the float32 weights change."""
        self._infer = None
        self._memo = None

    def _inference_net(self) -> _Net:
        if self._infer is None:
            net = copy.deepcopy(self.net).double().eval()
            for p in net.parameters():
                p.requires_grad_(False)
            self._infer = net
        return self._infer

    def _clip_onbits(self, onbits: Sequence[int]) -> tuple[int, ...]:
        bits = tuple(int(b) for b in onbits)
        for b in bits:
            if not 0 <= b < self.width:
                raise ValueError(f"on-bit {b} outside [0, {self.width})")
        if len(bits) > self.params.max_onbits:
            logger.warning("truncating %d on-bits to %d", len(bits), self.params.max_onbits)
            bits = bits[: self.params.max_onbits]
        return bits

    def _memory(self, onbits: Sequence[int]) -> tuple[torch.Tensor, torch.Tensor]:
        bits = self._clip_onbits(onbits)
        if self._memo is None or self._memo[0] != bits:
            with torch.no_grad():
                memory, mask = self._inference_net().encode(bit_rows([bits], self.width))
            self._memo = (bits, memory, mask)
        return self._memo[1], self._memo[2]

    def score_next_batch(self, onbits: Sequence[int], prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        """Log-probabilities for several equal-length prefixes sharing one on-bit set."""
        if not prefixes:
            return np.zeros((0, len(self.vocab)))
        length = len(prefixes[0])
        if any(len(p) != length for p in prefixes):
            raise ValueError("batched prefixes must share one length")
        if length > self.params.max_tokens + 1:
            raise ValueError(f"prefix longer than {self.params.max_tokens + 1} tokens")
        ids = [prefix_ids(self.vocab, p) for p in prefixes]
        memory, mask = self._memory(onbits)
        with torch.no_grad():
            inp = torch.as_tensor(ids, dtype=torch.long)
            n = len(ids)
            logits = self._inference_net().decode(
                memory.expand(n, -1, -1), mask.expand(n, -1), inp
            )[:, -1, :]
            out = torch.log_softmax(logits, dim=-1)
        return out.numpy().astype(np.float64)

    def score_next(self, onbits: Sequence[int], prefix: Sequence[int]) -> np.ndarray:
        return self.score_next_batch(onbits, [prefix])[0]

    def describe(self) -> dict:
        return {"params": asdict(self.params), "width": self.width, "vocab_size": len(self.vocab)}


class TableModel:
    """Mock decoder returning hand-set log-probability rows keyed by prefix ids.

    Prefixes missing from ``rows`` fall back to ``default`` (uniform when None).
    On-bits are ignored.
    """

    def __init__(
        self,
        vocab: Vocab,
        rows: dict[tuple[int, ...], Sequence[float]],
        width: int = 1,
        default: Sequence[float] | None = None,
    ):
        self.vocab = vocab
        self.width = width
        size = len(vocab)
        self.rows = {tuple(k): self._check(v, size) for k, v in rows.items()}
        self.default = self._check(default, size) if default is not None else np.full(size, -math.log(size))

    @staticmethod
    def _check(row: Sequence[float], size: int) -> np.ndarray:
        arr = np.asarray(row, dtype=np.float64)
        if arr.shape != (size,):
            raise ValueError(f"table row needs {size} entries")
        if abs(math.fsum(np.exp(arr)) - 1.0) > 1e-6:
            raise ValueError("table row must be a log-probability distribution")
        return arr

    def score_next(self, onbits: Sequence[int], prefix: Sequence[int]) -> np.ndarray:
        return self.rows.get(tuple(prefix), self.default).copy()
