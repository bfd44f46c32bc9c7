"""Central finite differences for checking autograd gradients of scalar losses."""

from __future__ import annotations

import torch


def numeric_gradient(f, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Central-difference gradient of scalar ``f`` at ``x`` (float64, entry by entry)."""
    x = x.detach().clone().double()
    grad = torch.zeros_like(x)
    flat, gflat = x.view(-1), grad.view(-1)
    with torch.no_grad():
        for k in range(flat.numel()):
            orig = flat[k].item()
            flat[k] = orig + h
            up = float(f(x))
            flat[k] = orig - h
            down = float(f(x))
            flat[k] = orig
            gflat[k] = (up - down) / (2 * h)
    return grad


def analytic_gradient(f, x: torch.Tensor) -> torch.Tensor:
    x = x.detach().clone().double().requires_grad_(True)
    (g,) = torch.autograd.grad(f(x), x)
    return g


def relative_error(a: torch.Tensor, b: torch.Tensor, floor: float = 1e-12) -> float:
    """|a - b| / max(|a|, |b|) in the Euclidean norm."""
    scale = max(float(a.norm()), float(b.norm()), floor)
    return float((a - b).norm()) / scale


def check_gradient(f, x: torch.Tensor, h: float = 1e-6) -> float:
    """Relative error between autograd and central differences for ``f`` at ``x``."""
    return relative_error(analytic_gradient(f, x), numeric_gradient(f, x, h))
