"""Training configuration, its YAML/JSON schema, and per-dataset presets."""

from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .ddc import KernelConfig, SigmaRule
from .errors import ArgumentError, SchemaError

# Warm-up lengths and bottleneck sizes used for the public benchmarks.
PRESETS = {
    "scene15": {"warmup_epochs": 200, "bottleneck_dims": [7, 20]},
    "mnist_usps": {"warmup_epochs": 20, "bottleneck_dims": [520, 100]},
    "landuse21": {"warmup_epochs": 200, "bottleneck_dims": [7, 20]},
    "aloi": {"warmup_epochs": 200, "bottleneck_dims": [20, 20]},
    "mnist4": {"warmup_epochs": 5, "bottleneck_dims": [14, 20]},
}


@dataclass
class TrainConfig:
    n_clusters: int
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 1.0
    rec_weight: float = 1.0
    tau: float = 0.5
    lr: float = 1e-3
    epochs: int = 400
    warmup_epochs: Optional[int] = None
    batch_size: int = 128
    seed: int = 0
    latent_dim: int = 64
    ae_hidden: tuple = (512, 256)
    assign_hidden: int = 64
    kernel: KernelConfig = field(default_factory=KernelConfig)
    rec_reduction: str = "sum"
    normalize_triu: bool = True
    standard_cl: bool = False
    ib_epochs: int = 50
    ib_lr: float = 1e-3
    ib_hidden: tuple = (1024, 256)
    bottleneck_dims: Optional[tuple] = None
    assume_clean: bool = False
    quality_path: Optional[str] = None
    normalize: bool = True
    preset: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.kernel, dict):
            self.kernel = KernelConfig(**self.kernel)
        self.ae_hidden = tuple(self.ae_hidden)
        self.ib_hidden = tuple(self.ib_hidden)
        if self.bottleneck_dims is not None:
            self.bottleneck_dims = tuple(self.bottleneck_dims)
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise SchemaError("preset", f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
            p = PRESETS[self.preset]
            if self.warmup_epochs is None:
                self.warmup_epochs = p["warmup_epochs"]
            if self.bottleneck_dims is None:
                self.bottleneck_dims = tuple(p["bottleneck_dims"])
        self.validate()

    @property
    def warmup(self) -> int:
        """Resolved warm-up length; defaults to ceil(5% of epochs)."""
        if self.warmup_epochs is None:
            return math.ceil(0.05 * self.epochs)
        return self.warmup_epochs

    def validate(self):
        checks = [
            ("n_clusters", self.n_clusters >= 2, "must be at least 2"),
            ("epochs", self.epochs >= 0, "must be nonnegative"),
            ("warmup_epochs", 0 <= self.warmup <= self.epochs, "must lie in [0, epochs]"),
            ("batch_size", self.batch_size >= 2, "must be at least 2"),
            ("lambda1", self.lambda1 >= 0, "must be nonnegative"),
            ("lambda2", self.lambda2 >= 0, "must be nonnegative"),
            ("lambda3", self.lambda3 >= 0, "must be nonnegative"),
            ("rec_weight", self.rec_weight >= 0, "must be nonnegative"),
            ("tau", self.tau > 0, "must be positive"),
            ("lr", self.lr > 0, "must be positive"),
            ("latent_dim", self.latent_dim >= 1, "must be positive"),
            ("rec_reduction", self.rec_reduction in ("sum", "mean"), "must be 'sum' or 'mean'"),
            ("ib_epochs", self.ib_epochs >= 0, "must be nonnegative"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise SchemaError(name, msg)

    def replace(self, **changes) -> "TrainConfig":
        d = self.to_dict()
        d.update(changes)
        return TrainConfig.from_dict(d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kernel"]["sigma_rule"] = self.kernel.sigma_rule.value
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        if not isinstance(doc, dict):
            raise SchemaError("<root>", "config must be a mapping")
        return cls(**_validate_fields(cls, doc, ""))

    @classmethod
    def load(cls, path, **overrides) -> "TrainConfig":
        text = Path(path).read_text()
        try:
            doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        except (ValueError, yaml.YAMLError) as exc:
            raise SchemaError("<root>", f"cannot parse {path}: {exc}") from exc
        doc = dict(doc or {})
        doc.update(overrides)
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))


def _validate_fields(cls, doc: dict, prefix: str) -> dict:
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if key not in fields:
            raise SchemaError(path, "unknown field")
        out[key] = _coerce(path, hints[key], value)
    for name, f in fields.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in doc:
            raise SchemaError(f"{prefix}{name}", "required field is missing")
    return out


def _coerce(path, hint, value):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
        origin, args = typing.get_origin(hint), typing.get_args(hint)
    if hint is KernelConfig:
        if not isinstance(value, dict):
            raise SchemaError(path, "must be a mapping")
        fields = _validate_fields(KernelConfig, value, f"{path}.")
        if "sigma_rule" in fields:
            try:
                fields["sigma_rule"] = SigmaRule(fields["sigma_rule"])
            except ValueError:
                raise SchemaError(f"{path}.sigma_rule", f"must be one of {[r.value for r in SigmaRule]}")
        try:
            return KernelConfig(**fields)
        except ArgumentError as exc:
            raise SchemaError(path, str(exc)) from exc
    if hint is SigmaRule:
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise SchemaError(path, "must be a boolean")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(path, "must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(path, "must be a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise SchemaError(path, "must be a string")
        return value
    if hint is tuple:
        if not isinstance(value, (list, tuple)) or not all(
                isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in value):
            raise SchemaError(path, "must be a list of positive integers")
        return tuple(value)
    return value
