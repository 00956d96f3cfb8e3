"""Central finite differences against autograd on a tiny float64 decoder."""

from __future__ import annotations

import numpy as np
import torch

from fp2mol.decoder import ToyTransformerParams, teacher_forced_loss
from fp2mol.decoder.model import _Net


def finite_difference_check(seed: int = 0, coordinates: int = 20, step: float = 1e-4) -> list[float]:
    """Relative errors between autograd and central differences, float64 toy model."""
    params = ToyTransformerParams(embed_dim=8, layers=1, heads=2, feedforward_dim=16, max_onbits=8, max_tokens=8)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = _Net(params, 32, 10).double()
    batch = [([1, 5, 9], [4, 5, 6, 7]), ([], [8, 9]), ([3, 30], [4, 4, 4, 5, 6])]
    net.zero_grad()
    teacher_forced_loss(net, batch, 32).backward()
    named = [(n, p) for n, p in net.named_parameters()]
    rng = np.random.default_rng(seed)
    errors = []
    with torch.no_grad():
        while len(errors) < coordinates:
            _, p = named[rng.integers(len(named))]
            idx = tuple(int(rng.integers(s)) for s in p.shape)
            analytic = float(p.grad[idx])
            original = float(p[idx])
            p[idx] = original + step
            up = float(teacher_forced_loss(net, batch, 32))
            p[idx] = original - step
            down = float(teacher_forced_loss(net, batch, 32))
            p[idx] = original
            numeric = (up - down) / (2 * step)
            # floor keeps exactly-zero gradients (padding rows) from dividing by zero
            errors.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return errors
