"""Clustering metrics and validation of quality scores against the noise ledger."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from .errors import ArgumentError


@dataclass
class ClusterResult:
    labels: np.ndarray
    G: Optional[np.ndarray] = None
    metrics: Optional[dict] = None


def _check(pred, truth):
    pred, truth = np.asarray(pred).ravel(), np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ArgumentError(f"label vectors differ in length: {pred.size} vs {truth.size}")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    """Counts with rows indexed by predicted cluster and columns by true class."""
    pred, truth = _check(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth) -> float:
    """Fraction of instances matched under the best one-to-one cluster/class mapping."""
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def nmi(pred, truth, average: str = "arithmetic") -> float:
    """Normalized mutual information; 0 whenever either labeling has one cluster."""
    pred, truth = _check(pred, truth)
    if len(np.unique(pred)) < 2 or len(np.unique(truth)) < 2:
        return 0.0
    return float(normalized_mutual_info_score(truth, pred, average_method=average))


def ari(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    return float(adjusted_rand_score(truth, pred))


def clustering_metrics(pred, truth) -> dict:
    return {"ACC": accuracy(pred, truth), "NMI": nmi(pred, truth), "ARI": ari(pred, truth)}


def quality_correlation(C, alpha) -> list:
    """Per-view Pearson and Spearman of contamination score against applied intensity.

    Clean cells count with intensity 0. Undefined correlations (a constant
    column) are reported as None. ``alpha`` may be a ledger or an N x V array.
    """
    alpha = getattr(alpha, "alpha", alpha)
    C, alpha = np.asarray(C, dtype=np.float64), np.asarray(alpha, dtype=np.float64)
    if C.shape != alpha.shape:
        raise ArgumentError(f"score shape {C.shape} does not match ledger shape {alpha.shape}")
    out = []
    for v in range(C.shape[1]):
        c, a = C[:, v], alpha[:, v]
        if np.ptp(c) == 0 or np.ptp(a) == 0:
            out.append({"view": v, "pearson": None, "spearman": None})
            continue
        out.append({"view": v, "pearson": float(stats.pearsonr(c, a)[0]),
                    "spearman": float(stats.spearmanr(c, a)[0])})
    return out


def box_statistics(C, alpha) -> list:
    """Quartile summary of contamination scores per (view, intensity level)."""
    alpha = getattr(alpha, "alpha", alpha)
    C, alpha = np.asarray(C, dtype=np.float64), np.asarray(alpha, dtype=np.float64)
    rows = []
    for v in range(C.shape[1]):
        for level in np.unique(alpha[:, v]):
            c = C[alpha[:, v] == level, v]
            q1, med, q3 = np.percentile(c, [25, 50, 75])
            rows.append({"view": v, "alpha": float(level), "n": int(c.size), "min": float(c.min()),
                         "q1": float(q1), "median": float(med), "q3": float(q3), "max": float(c.max()),
                         "mean": float(c.mean())})
    return rows


def group_means(C_v, alpha_v, levels) -> np.ndarray:
    C_v, alpha_v = np.asarray(C_v), np.asarray(alpha_v)
    return np.array([C_v[np.isclose(alpha_v, a)].mean() for a in levels])


def count_inversions(means, tolerance: float = 0.0):
    """Adjacent decreases in a sequence; returns (count, largest drop)."""
    drops = -np.diff(np.asarray(means, dtype=np.float64))
    bad = drops[drops > tolerance]
    return int(bad.size), float(bad.max()) if bad.size else 0.0
