"""Quality-guided fusion into a global consensus and its mutual-information alignment."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ArgumentError

LOG_EPS = 1e-9


@dataclass
class GlobalConsensus:
    H: torch.Tensor
    W: torch.Tensor


def fusion_weights(Q) -> torch.Tensor:
    """Normalize quality scores per instance; all-zero rows get uniform weights.

    Accepts a V-vector or an N x V matrix.
    """
    Q = torch.as_tensor(Q)
    if not torch.is_floating_point(Q):
        Q = Q.double()
    single = Q.ndim == 1
    Q = Q.reshape(1, -1) if single else Q
    total = Q.sum(dim=1, keepdim=True)
    uniform = torch.full_like(Q, 1.0 / Q.shape[1])
    W = torch.where(total > 0, Q / torch.where(total > 0, total, torch.ones_like(total)), uniform)
    return W[0] if single else W


def global_consensus(Z, W) -> GlobalConsensus:
    """h_i = sum_v W[i, v] * z_i^v."""
    dims = {z.shape[1] for z in Z}
    if len(dims) != 1:
        raise ArgumentError(f"latent dimensions differ across views: {sorted(dims)}")
    W = torch.as_tensor(W, dtype=Z[0].dtype)
    if W.shape != (len(Z[0]), len(Z)):
        raise ArgumentError(f"weight shape {tuple(W.shape)} does not match ({len(Z[0])}, {len(Z)})")
    stacked = torch.stack(list(Z), dim=1)  # N x V x m
    H = (W.unsqueeze(-1) * stacked).sum(dim=1)
    return GlobalConsensus(H=H, W=W)


class ProjectionHead(nn.Module):
    """Shared linear map to K logits followed by a softmax."""

    def __init__(self, latent_dim: int, n_clusters: int):
        super().__init__()
        if n_clusters < 2:
            raise ArgumentError("projection needs at least 2 clusters")
        self.linear = nn.Linear(latent_dim, n_clusters)

    def forward(self, x):
        return torch.softmax(self.linear(x), dim=1)


def joint_distribution(P_a: torch.Tensor, P_b: torch.Tensor) -> torch.Tensor:
    """Symmetrized K x K joint of two row-stochastic batch assignments."""
    J = P_a.T @ P_b / len(P_a)
    J = 0.5 * (J + J.T)
    return J / J.sum()


def mutual_information(P_a: torch.Tensor, P_b: torch.Tensor, eps: float = LOG_EPS) -> torch.Tensor:
    """Discrete mutual information of the joint built from two soft assignments."""
    if len(P_a) < 2:
        raise ArgumentError("mutual information needs a batch of at least 2")
    if P_a.shape[1] < 2:
        raise ArgumentError("mutual information needs K >= 2")
    J = joint_distribution(P_a, P_b)
    r = J.sum(dim=1, keepdim=True)
    c = J.sum(dim=0, keepdim=True)
    return (J * (torch.log(J.clamp_min(eps)) - torch.log(r.clamp_min(eps)) - torch.log(c.clamp_min(eps)))).sum()


def mutual_information_loss(H: torch.Tensor, Z, head: ProjectionHead) -> torch.Tensor:
    """Negative sum over views of I(H; Z^v) through the shared projection head."""
    P_H = head(H)
    total = H.new_zeros(())
    for z in Z:
        total = total - mutual_information(P_H, head(z))
    return total
