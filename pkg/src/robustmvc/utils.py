from __future__ import annotations

import contextlib
import os

import numpy as np
import torch

SEED_ENV = "ROBUSTMVC_SEED"


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


@contextlib.contextmanager
def seeded(seed: int):
    """Run a block under a fixed torch seed without disturbing global RNG state."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def as_tensor(x, dtype=torch.float32) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.to(dtype)
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def batches(n: int, batch_size: int, generator: torch.Generator):
    """Seeded shuffled index batches; a trailing batch is kept only if it has >= 2 rows."""
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) >= 2:
            yield idx


def mlp(sizes, out_activation=None) -> torch.nn.Sequential:
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(torch.nn.Linear(a, b))
        if i < len(sizes) - 2:
            layers.append(torch.nn.ReLU())
    if out_activation is not None:
        layers.append(out_activation)
    return torch.nn.Sequential(*layers)
