"""Per-view autoencoders, reconstruction loss and quality-weighted contrastive loss."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ArgumentError
from .utils import mlp

NORM_EPS = 1e-12


class ViewAutoencoder(nn.Module):
    """d_v -> hidden -> m encoder with a mirrored decoder and linear output."""

    def __init__(self, input_dim: int, latent_dim: int = 64, hidden=(512, 256)):
        super().__init__()
        self.encoder = mlp([input_dim, *hidden, latent_dim])
        self.decoder = mlp([latent_dim, *reversed(hidden), input_dim])
        self.input_dim = input_dim
        self.latent_dim = latent_dim

    def forward(self, x):
        z = self.encoder(x)
        return z, self.decoder(z)


@dataclass(frozen=True)
class ContrastiveConfig:
    tau: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise ArgumentError(f"temperature must be positive, got {self.tau}")


def reconstruction_loss(views, reconstructions, reduction: str = "sum") -> torch.Tensor:
    """Squared L2 reconstruction error summed over views and instances.

    ``reduction="mean"`` divides each view's sum by its row count instead.
    """
    if len(views) != len(reconstructions):
        raise ArgumentError("one reconstruction per view is required")
    total = 0.0
    for x, xr in zip(views, reconstructions):
        if x.shape != xr.shape:
            raise ArgumentError(f"shape mismatch {tuple(x.shape)} vs {tuple(xr.shape)}")
        err = ((x - xr) ** 2).sum()
        total = total + (err / x.shape[0] if reduction == "mean" else err)
    return total


def _unit_rows(Z):
    norms = Z.norm(dim=-1, keepdim=True)
    return Z / norms.clamp_min(NORM_EPS)


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of two vectors; 0 when either vector is zero."""
    return (_unit_rows(a) * _unit_rows(b)).sum(-1)


def similarity_matrix(Za: torch.Tensor, Zb: torch.Tensor) -> torch.Tensor:
    """S[i, k] = cosine(Za[i], Zb[k])."""
    return _unit_rows(Za) @ _unit_rows(Zb).T


def anchor_losses(Zu: torch.Tensor, Zv: torch.Tensor, tau: float) -> torch.Tensor:
    """Vector of per-anchor losses for view u against view v over the batch.

    Entry i is -log softmax_k(S(z_i^u, z_k^v) / tau) evaluated at k = i; the
    denominator runs over every batch row of view v, the positive included.
    """
    if len(Zu) < 2:
        raise ArgumentError("contrastive loss needs a batch of at least 2")
    logits = similarity_matrix(Zu, Zv) / tau
    return torch.logsumexp(logits, dim=1) - torch.diagonal(logits)


def contrastive_anchor_loss(i: int, u: int, v: int, Z, cfg: ContrastiveConfig = ContrastiveConfig()):
    if u == v:
        raise ArgumentError("anchor and target views must differ")
    return anchor_losses(Z[u], Z[v], cfg.tau)[i]


def robust_contrastive_loss(Z, Q, cfg: ContrastiveConfig = ContrastiveConfig()) -> torch.Tensor:
    """Quality-weighted sum of anchor losses over instances and ordered view pairs.

    ``Q`` is N_b x V; anchor (i, u) is weighted by Q[i, u] only. Q carries no
    gradient.
    """
    V = len(Z)
    Q = torch.as_tensor(Q, dtype=Z[0].dtype)
    if Q.shape != (len(Z[0]), V):
        raise ArgumentError(f"quality shape {tuple(Q.shape)} does not match batch ({len(Z[0])}, {V})")
    Q = Q.detach()
    total = Z[0].new_zeros(())
    for u in range(V):
        for v in range(V):
            if u != v:
                total = total + (Q[:, u] * anchor_losses(Z[u], Z[v], cfg.tau)).sum()
    return total
