"""Teacher-forced training of the toy decoder."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from ..smiles.tokens import TokenSequence, Vocab
from .model import ToyTransformer, ToyTransformerParams, _Net, bit_rows

__all__ = ["TrainConfig", "TrainingError", "train", "teacher_forced_loss", "Example"]

logger = logging.getLogger(__name__)

Example = tuple[Sequence[int], TokenSequence]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 128
    epochs: int = 6
    seed: int = 0
    stop_loss: float | None = None  # end early once an epoch's mean loss falls below this

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


def _collate(batch: Sequence[tuple[Sequence[int], list[int]]], width: int):
    bits = bit_rows([b for b, _ in batch], width)
    longest = max(len(ids) for _, ids in batch) + 1
    inp = torch.full((len(batch), longest), Vocab.pad_id, dtype=torch.long)
    tgt = torch.full((len(batch), longest), Vocab.pad_id, dtype=torch.long)
    for r, (_, ids) in enumerate(batch):
        seq = [Vocab.bos_id, *ids, Vocab.eos_id]
        inp[r, : len(seq) - 1] = torch.as_tensor(seq[:-1])
        tgt[r, : len(seq) - 1] = torch.as_tensor(seq[1:])
    return bits, inp, tgt


def teacher_forced_loss(
    net: _Net, batch: Sequence[tuple[Sequence[int], list[int]]], width: int, reduction: str = "mean"
) -> torch.Tensor:
    """Next-token cross-entropy over non-padding positions."""
    bits, inp, tgt = _collate(batch, width)
    logits = net(bits, inp)
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), tgt.reshape(-1), ignore_index=Vocab.pad_id, reduction=reduction
    )


def _prepare(corpus: Sequence[Example], vocab: Vocab, width: int, params: ToyTransformerParams):
    data = []
    for n, (onbits, tokens) in enumerate(corpus):
        bits = [int(b) for b in onbits]
        if any(not 0 <= b < width for b in bits):
            raise ValueError(f"example {n}: on-bit outside [0, {width})")
        if len(bits) > params.max_onbits:
            logger.warning("example %d: truncating %d on-bits to %d", n, len(bits), params.max_onbits)
            bits = bits[: params.max_onbits]
        if len(tokens) > params.max_tokens:
            raise ValueError(f"example {n}: {len(tokens)} tokens exceed max_tokens={params.max_tokens}")
        data.append((bits, vocab.encode(tokens)))
    return data


def _epoch_loss(net: _Net, data, width: int, batch_size: int) -> float:
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            batch = data[start : start + batch_size]
            total += float(teacher_forced_loss(net, batch, width, reduction="sum"))
            count += sum(len(ids) + 1 for _, ids in batch)
    return total / count


def train(
    params: ToyTransformerParams,
    corpus: Sequence[Example],
    cfg: TrainConfig,
    width: int,
    vocab: Vocab | None = None,
) -> ToyTransformer:
    """Fit a fresh toy decoder with Adam on (on-bits, tokens) pairs.

    ``loss_history[0]`` is the loss at initialization and ``loss_history[e]``
    the mean loss over epoch ``e``. Training is reproducible for a given seed
    and leaves the global torch RNG untouched.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    vocab = vocab or Vocab.build(tokens for _, tokens in corpus)
    data = _prepare(corpus, vocab, width, params)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        net = _Net(params, width, len(vocab))
    gen = torch.Generator().manual_seed(cfg.seed)
    optim = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate, betas=(0.9, 0.999), eps=1e-8)
    history = [_epoch_loss(net, data, width, cfg.batch_size)]
    logger.info("epoch 0 loss %.6f", history[0])
    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(len(data), generator=gen).tolist()
        total, count = 0.0, 0
        for step, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [data[i] for i in order[start : start + cfg.batch_size]]
            optim.zero_grad()
            loss = teacher_forced_loss(net, batch, width)
            if not torch.isfinite(loss.detach()):
                raise TrainingError(f"non-finite loss {loss.item()} at epoch {epoch} step {step}")
            loss.backward()
            optim.step()
            if not all(torch.isfinite(p).all() for p in net.parameters()):
                raise TrainingError(f"non-finite weights after epoch {epoch} step {step}")
            tokens = sum(len(ids) + 1 for _, ids in batch)
            total += loss.item() * tokens
            count += tokens
        history.append(total / count)
        logger.info("epoch %d loss %.6f", epoch, history[-1])
        if cfg.stop_loss is not None and history[-1] < cfg.stop_loss:
            break
    model = ToyTransformer(params, vocab, width, net)
    model.loss_history = history
    return model

