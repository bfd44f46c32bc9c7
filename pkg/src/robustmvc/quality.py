"""Information-bottleneck reconstruction scoring of per-cell data quality.

Each view gets its own stochastic encoder squeezed through a narrow latent
and a decoder back to the input space. Cells the bottleneck cannot
reconstruct are treated as contaminated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ArgumentError, DataError
from .utils import as_tensor, batches, mlp, seeded

LOGVAR_RANGE = (-10.0, 10.0)


def default_bottleneck(input_dim: int) -> int:
    return max(1, min(20, input_dim // 4))


class IBModel(nn.Module):
    """Gaussian stochastic encoder (mean and log-variance heads) plus decoder."""

    def __init__(self, input_dim: int, bottleneck_dim: int, hidden=(1024, 256)):
        super().__init__()
        check_bottleneck(input_dim, bottleneck_dim)
        self.input_dim = input_dim
        self.bottleneck_dim = bottleneck_dim
        self.trunk = nn.Sequential(*list(mlp([input_dim, *hidden]).children()), nn.ReLU())
        self.mean = nn.Linear(hidden[-1], bottleneck_dim)
        self.logvar = nn.Linear(hidden[-1], bottleneck_dim)
        self.decoder = mlp([bottleneck_dim, *reversed(hidden), input_dim])
        self.losses: list = []

    def encode(self, x):
        h = self.trunk(x)
        return self.mean(h), self.logvar(h).clamp(*LOGVAR_RANGE)

    def forward(self, x, sample: bool = True):
        mu, logvar = self.encode(x)
        z = mu + torch.exp(0.5 * logvar) * torch.randn_like(mu) if sample else mu
        return self.decoder(z)

    @torch.no_grad()
    def reconstruct(self, x):
        """Deterministic reconstruction through the mean latent."""
        return self.decoder(self.encode(x)[0])


def check_bottleneck(input_dim: int, bottleneck_dim: int) -> None:
    if bottleneck_dim < 1 or 2 * bottleneck_dim > input_dim:
        raise ArgumentError(
            f"bottleneck dimension {bottleneck_dim} must lie in [1, d/2] for input dimension {input_dim}")


def train_ib(view_matrix, bottleneck_dim: int, config, seed: int = None) -> IBModel:
    """Fit one view's estimator by minimizing the Gaussian negative log-likelihood.

    With a unit-variance decoder the objective is half the squared error,
    using one reparameterized latent sample per step. Epoch-mean losses are
    kept on ``model.losses``.
    """
    x = as_tensor(view_matrix)
    check_bottleneck(x.shape[1], bottleneck_dim)
    seed = config.seed if seed is None else seed
    with seeded(seed):
        model = IBModel(x.shape[1], bottleneck_dim, config.ib_hidden)
        opt = torch.optim.Adam(model.parameters(), lr=config.ib_lr)
        gen = torch.Generator().manual_seed(seed)
        model.train()
        for _ in range(config.ib_epochs):
            total, count = 0.0, 0
            for idx in batches(len(x), config.batch_size, gen):
                xb = x[idx]
                loss = 0.5 * ((model(xb) - xb) ** 2).sum(dim=1).mean()
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += float(loss.detach()) * len(idx)
                count += len(idx)
            model.losses.append(total / max(count, 1))
    model.eval()
    return model


def reconstruction_error(model: IBModel, view_matrix) -> np.ndarray:
    """Per-instance L1 distance between a row and its mean-latent reconstruction."""
    x = as_tensor(view_matrix)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ArgumentError(f"view has {x.shape[-1]} features, model expects {model.input_dim}")
    return (x - model.reconstruct(x)).abs().sum(dim=1).double().numpy()


def contamination_score(R) -> np.ndarray:
    """Min-max normalize errors over the whole view; constant errors give zeros."""
    R = np.asarray(R, dtype=np.float64)
    lo, hi = R.min(), R.max()
    if hi <= lo:
        return np.zeros_like(R)
    return (R - lo) / (hi - lo)


def quality_score(C) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if np.any(C < 0) or np.any(C > 1) or not np.all(np.isfinite(C)):
        raise ArgumentError("contamination scores must lie in [0, 1]")
    return (1.0 - C) ** 2


@dataclass
class QualityScores:
    R: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    bottleneck_dims: list = field(default_factory=list)

    @classmethod
    def uniform(cls, n: int, n_views: int) -> "QualityScores":
        """All cells treated as clean."""
        zeros = np.zeros((n, n_views))
        return cls(R=zeros, C=zeros.copy(), Q=np.ones((n, n_views)), bottleneck_dims=[])

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "C": self.C.tolist(), "Q": self.Q.tolist(),
                "bottleneck_dims": list(self.bottleneck_dims)}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "QualityScores":
        try:
            doc = json.loads(Path(path).read_text())
            return cls(R=np.asarray(doc["R"], dtype=np.float64), C=np.asarray(doc["C"], dtype=np.float64),
                       Q=np.asarray(doc["Q"], dtype=np.float64), bottleneck_dims=list(doc["bottleneck_dims"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: not a valid quality-score file ({exc})") from exc


def bottleneck_dims_for(dims, config) -> list:
    if config.bottleneck_dims is not None:
        if len(config.bottleneck_dims) != len(dims):
            raise ArgumentError(f"{len(config.bottleneck_dims)} bottleneck dims given for {len(dims)} views")
        return list(config.bottleneck_dims)
    return [default_bottleneck(d) for d in dims]


def score_views(models, dataset) -> QualityScores:
    R = np.stack([reconstruction_error(m, x) for m, x in zip(models, dataset.views)], axis=1)
    C = np.stack([contamination_score(R[:, v]) for v in range(R.shape[1])], axis=1)
    return QualityScores(R=R, C=C, Q=quality_score(C), bottleneck_dims=[m.bottleneck_dim for m in models])


def estimate_quality(dataset, config, return_models: bool = False):
    """Train one estimator per view and score every (instance, view) cell."""
    b = bottleneck_dims_for(dataset.dims, config)
    models = [train_ib(x, bv, config, seed=config.seed + 7919 * v)
              for v, (x, bv) in enumerate(zip(dataset.views, b))]
    scores = score_views(models, dataset)
    return (scores, models) if return_models else scores
