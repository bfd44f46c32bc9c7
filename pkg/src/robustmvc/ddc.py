"""Soft cluster assignment head and the divergence-based clustering loss."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .errors import ArgumentError

EPS = 1e-9


class KernelWarning(UserWarning):
    """Emitted when the kernel bandwidth falls back to 1."""


class SigmaRule(str, enum.Enum):
    RELATIVE_MEDIAN = "relative_median"
    FIXED = "fixed"


@dataclass
class KernelConfig:
    sigma_rule: SigmaRule = SigmaRule.RELATIVE_MEDIAN
    rel: float = 0.5
    fixed_sigma: Optional[float] = None

    def __post_init__(self):
        self.sigma_rule = SigmaRule(self.sigma_rule)
        if self.rel <= 0:
            raise ArgumentError("kernel rel must be positive")
        if self.sigma_rule is SigmaRule.FIXED and (self.fixed_sigma is None or self.fixed_sigma <= 0):
            raise ArgumentError("fixed sigma rule needs a positive fixed_sigma")


class AssignmentHead(nn.Module):
    """m -> hidden -> K with a row-wise softmax; the hidden layer is batch-normalized."""

    def __init__(self, latent_dim: int, n_clusters: int, hidden: int = 64):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(latent_dim, hidden), nn.ReLU(), nn.BatchNorm1d(hidden),
                                 nn.Linear(hidden, n_clusters))
        self.n_clusters = n_clusters

    def forward(self, h):
        return torch.softmax(self.net(h), dim=1)


def squared_distances(H: torch.Tensor) -> torch.Tensor:
    sq = (H * H).sum(dim=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * H @ H.T
    d2 = d2.clamp_min(0.0)
    # exact zeros on the diagonal keep E_ii = 1
    return d2 * (1.0 - torch.eye(len(H), dtype=H.dtype, device=H.device))


def kernel_sigma2(H: torch.Tensor, cfg: KernelConfig) -> float:
    """Squared bandwidth, computed without gradient.

    ``relative_median`` uses sigma^2 = rel * median of the off-diagonal squared
    pairwise distances of the batch.
    """
    if cfg.sigma_rule is SigmaRule.FIXED:
        return float(cfg.fixed_sigma) ** 2
    with torch.no_grad():
        d2 = squared_distances(H.detach())
        iu = torch.triu_indices(len(H), len(H), offset=1)
        med = float(d2[iu[0], iu[1]].median())
    if med <= 0.0:
        warnings.warn("all rows identical; kernel bandwidth falls back to sigma=1", KernelWarning)
        return 1.0
    return cfg.rel * med


def kernel_matrix(H: torch.Tensor, cfg: KernelConfig = None, sigma2: Optional[float] = None) -> torch.Tensor:
    """Gaussian kernel E_ij = exp(-|h_i - h_j|^2 / (2 sigma^2)).

    Pass ``sigma2`` to pin the bandwidth (gradient checks do this).
    """
    if len(H) < 2:
        raise ArgumentError("kernel needs at least 2 rows")
    if sigma2 is None:
        sigma2 = kernel_sigma2(H, cfg or KernelConfig())
    E = torch.exp(-squared_distances(H) / (2.0 * sigma2))
    return 0.5 * (E + E.T)


def simplex_corner_affinity(G: torch.Tensor) -> torch.Tensor:
    """B_ab = exp(-|g_a - e_b|^2) for the K simplex corners e_b."""
    sq = (G * G).sum(dim=1, keepdim=True)
    return torch.exp(-(sq - 2.0 * G + 1.0).clamp_min(0.0))


def cs_divergence_term(A: torch.Tensor, E: torch.Tensor, eps: float = EPS) -> torch.Tensor:
    """Mean pairwise normalized kernel inner product between columns of A.

    Sum over column pairs i < j of a_i'E a_j / sqrt(a_i'E a_i * a_j'E a_j),
    divided by K(K-1).
    """
    K = A.shape[1]
    M = A.T @ E @ A
    diag = torch.diagonal(M)
    denom = torch.sqrt((diag[:, None] * diag[None, :]).clamp_min(eps * eps))
    iu = torch.triu_indices(K, K, offset=1)
    return (M / denom)[iu[0], iu[1]].sum() / (K * (K - 1))


def orthogonality_term(G: torch.Tensor, normalize: bool = False) -> torch.Tensor:
    """Sum of the strictly upper-triangular entries of G'G."""
    K = G.shape[1]
    iu = torch.triu_indices(K, K, offset=1)
    out = (G.T @ G)[iu[0], iu[1]].sum()
    return out / G.shape[0] if normalize else out


def ddc_terms(G: torch.Tensor, E: torch.Tensor, normalize_triu: bool = False):
    if G.shape[1] < 2:
        raise ArgumentError("DDC loss needs at least 2 clusters")
    if E.shape != (G.shape[0], G.shape[0]):
        raise ArgumentError(f"kernel shape {tuple(E.shape)} does not match {G.shape[0]} rows")
    return (
        cs_divergence_term(G, E),
        orthogonality_term(G, normalize_triu),
        cs_divergence_term(simplex_corner_affinity(G), E),
    )


def ddc_loss(G: torch.Tensor, E: torch.Tensor, normalize_triu: bool = False) -> torch.Tensor:
    t1, t2, t3 = ddc_terms(G, E, normalize_triu)
    return t1 + t2 + t3
