"""Two-phase training loop, label extraction, ablations and checkpoints."""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

from . import __version__
from .config import TrainConfig
from .data import MultiViewDataset, apply_scaling, normalize_features
from .ddc import AssignmentHead, ddc_loss, kernel_matrix
from .errors import ArgumentError, CompatibilityError, DataError
from .fusion import ProjectionHead, fusion_weights, global_consensus, mutual_information_loss
from .metrics import ClusterResult, clustering_metrics
from .quality import IBModel, QualityScores, estimate_quality, score_views
from .representation import ContrastiveConfig, ViewAutoencoder, reconstruction_loss, robust_contrastive_loss
from .utils import as_tensor, batches, seeded

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
WARMUP, FORMAL = "warmup", "formal"


class MVCNetwork(nn.Module):
    """Per-view autoencoders, the MI projection head and the assignment head."""

    def __init__(self, dims, cfg: TrainConfig):
        super().__init__()
        self.dims = list(dims)
        self.autoencoders = nn.ModuleList(ViewAutoencoder(d, cfg.latent_dim, cfg.ae_hidden) for d in dims)
        self.projection = ProjectionHead(cfg.latent_dim, cfg.n_clusters)
        self.assignment = AssignmentHead(cfg.latent_dim, cfg.n_clusters, cfg.assign_hidden)

    def forward(self, xs, W):
        zs, recons = zip(*(ae(x) for ae, x in zip(self.autoencoders, xs)))
        consensus = global_consensus(zs, W)
        return list(zs), list(recons), consensus.H, self.assignment(consensus.H)


@dataclass
class TrainedModel:
    network: MVCNetwork
    config: TrainConfig
    ib_models: list = field(default_factory=list)
    scaling: Optional[list] = None


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_list(self) -> list:
        return list(self.records)


def total_loss(batch, network: MVCNetwork, Q, cfg: TrainConfig, phase: str):
    """Weighted objective for one batch; returns (total, raw term values).

    The DDC term is only evaluated in the formal phase.
    """
    Q = as_tensor(Q, batch[0].dtype)
    W = fusion_weights(Q).to(batch[0].dtype)
    zs, recons, H, G = network(batch, W)
    rcl_q = torch.ones_like(Q) if cfg.standard_cl else Q
    terms = {
        "rec": reconstruction_loss(batch, recons, cfg.rec_reduction),
        "rcl": robust_contrastive_loss(zs, rcl_q, ContrastiveConfig(cfg.tau)),
        "mi": mutual_information_loss(H, zs, network.projection),
    }
    total = cfg.rec_weight * terms["rec"] + cfg.lambda1 * terms["rcl"] + cfg.lambda2 * terms["mi"]
    if phase == FORMAL:
        terms["ddc"] = ddc_loss(G, kernel_matrix(H, cfg.kernel), cfg.normalize_triu)
        total = total + cfg.lambda3 * terms["ddc"]
    return total, terms


def prepare(dataset: MultiViewDataset, cfg: TrainConfig) -> MultiViewDataset:
    return normalize_features(dataset) if cfg.normalize else dataset


def compute_quality(dataset: MultiViewDataset, cfg: TrainConfig):
    """Quality scores for training: reused from file, uniform, or freshly estimated."""
    if cfg.quality_path:
        q = QualityScores.load(cfg.quality_path)
        if q.Q.shape != (dataset.n, dataset.n_views):
            raise CompatibilityError(f"quality file has shape {q.Q.shape}, data is {(dataset.n, dataset.n_views)}")
        return q, []
    if cfg.assume_clean:
        return QualityScores.uniform(dataset.n, dataset.n_views), []
    return estimate_quality(dataset, cfg, return_models=True)


def train(dataset: MultiViewDataset, cfg: TrainConfig, quality: QualityScores = None, ib_models=None):
    """Estimate quality once, then run warm-up and formal epochs.

    Pass ``quality`` to skip estimation (ablation arms share it). Returns
    ``(model, quality, history)``.
    """
    if cfg.n_clusters > dataset.n:
        raise ArgumentError(f"K={cfg.n_clusters} exceeds N={dataset.n}")
    data = prepare(dataset, cfg)
    if quality is None:
        quality, ib_models = compute_quality(data, cfg)
    Q_all = torch.as_tensor(quality.Q, dtype=torch.float32)
    Q_all.requires_grad_(False)
    xs = [as_tensor(x) for x in data.views]
    history = TrainHistory()
    with seeded(cfg.seed):
        network = MVCNetwork(data.dims, cfg)
        opt = torch.optim.Adam(network.parameters(), lr=cfg.lr)
        gen = torch.Generator().manual_seed(cfg.seed)
        for epoch in range(cfg.epochs):
            phase = WARMUP if epoch < cfg.warmup else FORMAL
            start = time.perf_counter()
            sums, count = {}, 0
            network.train()
            for idx in batches(data.n, cfg.batch_size, gen):
                loss, terms = total_loss([x[idx] for x in xs], network, Q_all[idx], cfg, phase)
                opt.zero_grad()
                loss.backward()
                opt.step()
                count += 1
                sums["total"] = sums.get("total", 0.0) + float(loss.detach())
                for k, v in terms.items():
                    sums[k] = sums.get(k, 0.0) + float(v.detach())
            rec = {k: v / count for k, v in sums.items()}
            rec.update(epoch=epoch, phase=phase, seconds=time.perf_counter() - start, seed=cfg.seed)
            history.records.append(rec)
            log.debug("epoch %d %s total=%.4f", epoch, phase, rec["total"])
    network.eval()
    model = TrainedModel(network=network, config=cfg, ib_models=list(ib_models or []), scaling=data.scaling)
    return model, quality, history


@torch.no_grad()
def embed(model: TrainedModel, dataset: MultiViewDataset, quality: QualityScores):
    """Full-dataset latents, fusion weights, consensus and soft assignments."""
    data = _apply_model_scaling(model, dataset)
    check_compatible(model, data)
    xs = [as_tensor(x) for x in data.views]
    W = fusion_weights(as_tensor(quality.Q)).float()
    zs, _, H, G = model.network(xs, W)
    return {"Z": [z.numpy() for z in zs], "W": W.numpy(), "H": H.numpy(), "G": G.double().numpy()}


def labels_from_assignments(G) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest cluster index."""
    return np.argmax(np.asarray(G), axis=1)


def predict(model: TrainedModel, dataset: MultiViewDataset, quality: QualityScores = None) -> ClusterResult:
    if quality is None:
        quality = score_quality(model, dataset)
    out = embed(model, dataset, quality)
    labels = labels_from_assignments(out["G"])
    metrics = clustering_metrics(labels, dataset.labels) if dataset.labels is not None else None
    return ClusterResult(labels=labels, G=out["G"], metrics=metrics)


def score_quality(model: TrainedModel, dataset: MultiViewDataset) -> QualityScores:
    """Quality scores for ``dataset`` from the model's frozen estimators."""
    if not model.ib_models:
        return QualityScores.uniform(dataset.n, dataset.n_views)
    data = _apply_model_scaling(model, dataset)
    check_compatible(model, data)
    return score_views(model.ib_models, data)


def _apply_model_scaling(model, dataset):
    if model.config.normalize and model.scaling is not None:
        if len(model.scaling) != dataset.n_views or any(
                len(lo) != d for (lo, _), d in zip(model.scaling, dataset.dims)):
            raise CompatibilityError(f"checkpoint expects view dims {model.network.dims}, data has {dataset.dims}")
        return apply_scaling(dataset, model.scaling)
    return dataset


def check_compatible(model: TrainedModel, dataset: MultiViewDataset) -> None:
    if list(dataset.dims) != list(model.network.dims):
        raise CompatibilityError(f"checkpoint expects view dims {model.network.dims}, data has {dataset.dims}")


# -- ablations ------------------------------------------------------------------

class Ablation(str, enum.Enum):
    FULL = "full"
    WO_DDC = "wo_ddc"
    WO_MI = "wo_mi"
    WO_RCL = "wo_rcl"
    WO_REC = "wo_rec"
    WO_WARMUP = "wo_warmup"
    STANDARD_CL = "standard_cl"


def ablation_config(cfg: TrainConfig, setting) -> TrainConfig:
    try:
        setting = Ablation(setting)
    except ValueError:
        raise ArgumentError(f"unknown ablation setting {setting!r}; choose from {[a.value for a in Ablation]}")
    changes = {
        Ablation.FULL: {},
        Ablation.WO_DDC: {"lambda3": 0.0},
        Ablation.WO_MI: {"lambda2": 0.0},
        Ablation.WO_RCL: {"lambda1": 0.0},
        Ablation.WO_REC: {"rec_weight": 0.0},
        Ablation.WO_WARMUP: {"warmup_epochs": 0},
        Ablation.STANDARD_CL: {"standard_cl": True},
    }[setting]
    return cfg.replace(**changes)


def run_ablation(dataset: MultiViewDataset, cfg: TrainConfig, setting, quality: QualityScores = None) -> dict:
    """Train one ablation arm and return its metrics row."""
    arm = ablation_config(cfg, setting)
    if dataset.labels is None:
        raise DataError("ablation needs ground-truth labels")
    model, quality, _ = train(dataset, arm, quality=quality)
    result = predict(model, dataset, quality)
    return {"setting": Ablation(setting).value, "seed": arm.seed, **result.metrics}


# -- persistence ------------------------------------------------------------------

def save_checkpoint(model: TrainedModel, path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "toolkit_version": __version__,
        "config": model.config.to_dict(),
        "dims": model.network.dims,
        "state_dict": model.network.state_dict(),
        "ib": [{"input_dim": m.input_dim, "bottleneck_dim": m.bottleneck_dim, "state_dict": m.state_dict()}
               for m in model.ib_models],
        "scaling": None if model.scaling is None else [
            (np.asarray(lo).tolist(), np.asarray(hi).tolist()) for lo, hi in model.scaling],
    }
    torch.save(payload, path)


def load_checkpoint(path) -> TrainedModel:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except (OSError, RuntimeError, EOFError) as exc:
        raise DataError(f"{path}: cannot read checkpoint ({exc})") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CompatibilityError(f"{path}: unsupported checkpoint version {payload.get('format_version')}")
    cfg = TrainConfig.from_dict(payload["config"])
    network = MVCNetwork(payload["dims"], cfg)
    network.load_state_dict(payload["state_dict"])
    network.eval()
    ib_models = []
    for rec in payload["ib"]:
        m = IBModel(rec["input_dim"], rec["bottleneck_dim"], cfg.ib_hidden)
        m.load_state_dict(rec["state_dict"])
        m.eval()
        ib_models.append(m)
    scaling = payload["scaling"]
    if scaling is not None:
        scaling = [(np.asarray(lo), np.asarray(hi)) for lo, hi in scaling]
    return TrainedModel(network=network, config=cfg, ib_models=ib_models, scaling=scaling)


def save_history(history: TrainHistory, path) -> None:
    Path(path).write_text(json.dumps(history.to_list(), indent=1))
