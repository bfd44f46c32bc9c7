"""Multi-view datasets: loading, synthesis, scaling and noise injection."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, DataError, StructuralError

BINARY_MAGIC = 0x3146564D  # b"MVF1" read as little-endian uint32
_HEADER = struct.Struct("<III")
LABEL_FILE = "labels.txt"
LEDGER_FILE = "ledger.json"
VIEW_SUFFIXES = (".csv", ".bin")

DEFAULT_INTENSITIES = (0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass
class MultiViewDataset:
    """V dense feature matrices over the same N instances."""

    views: list
    labels: Optional[np.ndarray] = None
    names: Optional[list] = None
    # per-view (min, max) feature vectors, set by normalize_features
    scaling: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.views) < 1:
            raise StructuralError("dataset needs at least one view")
        self.views = [np.ascontiguousarray(np.asarray(x, dtype=np.float64)) for x in self.views]
        for v, x in enumerate(self.views):
            if x.ndim != 2:
                raise StructuralError(f"view {v} is not a matrix (ndim={x.ndim})")
            if x.shape[1] < 1:
                raise StructuralError(f"view {v} has no features")
        rows = {x.shape[0] for x in self.views}
        if len(rows) != 1:
            raise StructuralError(f"views have mismatched row counts: {[x.shape[0] for x in self.views]}")
        if self.n < 2:
            raise StructuralError("dataset needs at least 2 instances")
        for v, x in enumerate(self.views):
            bad = ~np.isfinite(x)
            if bad.any():
                row = int(np.argwhere(bad)[0, 0])
                raise DataError(f"view {self.view_name(v)} has a non-finite value at row {row}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.n,):
                raise StructuralError(f"labels have shape {self.labels.shape}, expected ({self.n},)")
            if not np.issubdtype(self.labels.dtype, np.integer):
                if not np.all(np.equal(np.mod(self.labels, 1), 0)):
                    raise DataError("labels must be integers")
            self.labels = self.labels.astype(np.int64)
            k = int(self.labels.max()) + 1
            if self.labels.min() < 0 or len(np.unique(self.labels)) != k:
                raise DataError("labels must use every value in [0, K) at least once")
        if self.names is not None and len(self.names) != len(self.views):
            raise StructuralError("one name per view is required")

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list:
        return [x.shape[1] for x in self.views]

    @property
    def n_clusters(self) -> Optional[int]:
        return None if self.labels is None else int(self.labels.max()) + 1

    def view_name(self, v: int) -> str:
        return self.names[v] if self.names else f"view{v}"

    def fingerprint(self) -> str:
        """SHA-256 over the raw view bytes and labels."""
        h = hashlib.sha256()
        for x in self.views:
            h.update(np.asarray(x.shape, dtype=np.int64).tobytes())
            h.update(x.tobytes())
        if self.labels is not None:
            h.update(self.labels.tobytes())
        return h.hexdigest()

    def replace(self, views) -> "MultiViewDataset":
        return MultiViewDataset(list(views), self.labels, self.names, self.scaling)


class NoiseKind(str, enum.Enum):
    GAUSSIAN_STANDARDIZED = "gaussian_standardized"
    UNIFORM_RANGE = "uniform_range"


class ViewPolicy(str, enum.Enum):
    ONE_RANDOM_VIEW = "one_random_view"
    ALL_VIEWS = "all_views"
    EACH_VIEW_INDEPENDENT = "each_view_independent"


@dataclass(frozen=True)
class NoiseSpec:
    ratio: float
    intensities: tuple = DEFAULT_INTENSITIES
    noise_kind: NoiseKind = NoiseKind.UNIFORM_RANGE
    view_policy: ViewPolicy = ViewPolicy.ALL_VIEWS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "intensities", tuple(float(a) for a in self.intensities))
        object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))
        object.__setattr__(self, "view_policy", ViewPolicy(self.view_policy))
        if not 0.0 <= self.ratio <= 1.0:
            raise ArgumentError(f"noise ratio must lie in [0, 1], got {self.ratio}")
        if not self.intensities:
            raise ArgumentError("at least one intensity is required")
        for a in self.intensities:
            if not 0.0 < a <= 1.0:
                raise ArgumentError(f"intensities must lie in (0, 1], got {a}")

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "intensities": list(self.intensities),
            "noise_kind": self.noise_kind.value,
            "view_policy": self.view_policy.value,
            "seed": self.seed,
        }


@dataclass
class NoiseLedger:
    """Ground truth of the intensity applied to each (instance, view) cell."""

    alpha: np.ndarray
    seed: int
    spec: NoiseSpec

    @property
    def contaminated_rows(self) -> np.ndarray:
        return np.flatnonzero((self.alpha > 0).any(axis=1))

    def counts(self) -> dict:
        """Number of contaminated cells per intensity level."""
        return {a: int(np.sum(self.alpha == a)) for a in self.spec.intensities}

    def to_json(self) -> str:
        doc = {"spec": self.spec.to_dict(), "seed": self.seed, "shape": list(self.alpha.shape),
               "alpha": self.alpha.tolist()}
        return json.dumps(doc, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "NoiseLedger":
        try:
            doc = json.loads(Path(path).read_text())
            spec = NoiseSpec(**doc["spec"])
            alpha = np.asarray(doc["alpha"], dtype=np.float64).reshape(doc["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: not a valid noise ledger ({exc})") from exc
        return cls(alpha=alpha, seed=int(doc["seed"]), spec=spec)


# -- file formats -------------------------------------------------------------

def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack_from(raw)
        if magic != BINARY_MAGIC:
            raise DataError(f"{path}: bad magic number {magic:#x}")
        body = raw[_HEADER.size:]
        if len(body) != rows * cols * 8:
            raise DataError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
        x = np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)
    else:
        x = _read_csv(path)
    bad = ~np.isfinite(x)
    if bad.any():
        row = int(np.argwhere(bad)[0, 0])
        raise DataError(f"{path}: non-finite value at row {row}")
    return x


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh)):
            if not rec:
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if lineno == 0 and not rows:
                    continue  # header
                raise DataError(f"{path}: unparseable value at row {len(rows)}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise StructuralError(f"{path}: ragged rows")
    return np.asarray(rows, dtype=np.float64)


def write_matrix(path, x) -> None:
    path = Path(path)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if path.suffix == ".bin":
        rows, cols = x.shape
        path.write_bytes(_HEADER.pack(BINARY_MAGIC, rows, cols) + x.astype("<f8").tobytes())
    else:
        buf = io.StringIO()
        np.savetxt(buf, x, delimiter=",", fmt="%.17g")
        path.write_text(buf.getvalue())


def load_dataset(path) -> MultiViewDataset:
    """Load every ``*.csv``/``*.bin`` view file in a directory, sorted by name.

    An optional ``labels.txt`` holds one integer per line.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"{root}: not a dataset directory")
    files = sorted(p for p in root.iterdir() if p.suffix in VIEW_SUFFIXES)
    if not files:
        raise DataError(f"{root}: no view files (*.csv, *.bin)")
    views = [read_matrix(p) for p in files]
    rows = [x.shape[0] for x in views]
    if len(set(rows)) != 1:
        detail = ", ".join(f"{p.name}={r}" for p, r in zip(files, rows))
        raise StructuralError(f"mismatched row counts across views: {detail}")
    labels = None
    label_path = root / LABEL_FILE
    if label_path.exists():
        try:
            labels = np.loadtxt(label_path, dtype=np.int64, ndmin=1)
        except ValueError as exc:
            raise DataError(f"{label_path}: {exc}") from exc
    return MultiViewDataset(views, labels, [p.stem for p in files])


def save_dataset(dataset: MultiViewDataset, path, fmt: str = "csv") -> list:
    """Write a dataset in the layout read by :func:`load_dataset`."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for v, x in enumerate(dataset.views):
        p = root / f"{dataset.view_name(v)}.{fmt}"
        write_matrix(p, x)
        written.append(p)
    if dataset.labels is not None:
        p = root / LABEL_FILE
        p.write_text("".join(f"{int(y)}\n" for y in dataset.labels))
        written.append(p)
    return written


# -- synthesis and preprocessing -------------------------------------------------

def generate_synthetic(K: int, N: int, V: int, dims: Sequence[int], separation: float = 6.0,
                       seed: int = 0, view_noise: float = 0.1) -> MultiViewDataset:
    """Gaussian blobs in a shared K-dimensional latent, linearly embedded per view.

    Cluster centres sit on scaled basis vectors so every pair is ``separation``
    apart; each view applies its own random K x d_v map plus isotropic noise.
    """
    if K < 2:
        raise ArgumentError("K must be at least 2")
    if N < K:
        raise ArgumentError(f"N={N} is smaller than the cluster count K={K}")
    if V < 2:
        raise ArgumentError("V must be at least 2")
    if len(dims) != V:
        raise ArgumentError(f"expected {V} view dimensions, got {len(dims)}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(N) % K)
    centres = np.eye(K) * (separation / np.sqrt(2.0))
    latent = centres[labels] + rng.standard_normal((N, K))
    views = []
    for d in dims:
        A = rng.standard_normal((K, d)) / np.sqrt(K)
        views.append(latent @ A + view_noise * rng.standard_normal((N, d)))
    return MultiViewDataset(views, labels, [f"view{v}" for v in range(V)])


def normalize_features(dataset: MultiViewDataset) -> MultiViewDataset:
    """Per-feature min-max scaling to [0, 1]; constant features become 0."""
    views, scaling = [], []
    for x in dataset.views:
        lo, hi = x.min(axis=0), x.max(axis=0)
        views.append(_scale(x, lo, hi))
        scaling.append((lo, hi))
    out = MultiViewDataset(views, dataset.labels, dataset.names)
    out.scaling = scaling
    return out


def apply_scaling(dataset: MultiViewDataset, scaling) -> MultiViewDataset:
    """Reuse stored (min, max) pairs on other data; results are clipped to [0, 1]."""
    if len(scaling) != dataset.n_views:
        raise ArgumentError("scaling does not match the number of views")
    views = []
    for x, (lo, hi) in zip(dataset.views, scaling):
        lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
        if lo.shape != (x.shape[1],):
            raise ArgumentError("scaling does not match the view dimension")
        views.append(np.clip(_scale(x, lo, hi), 0.0, 1.0))
    out = MultiViewDataset(views, dataset.labels, dataset.names)
    out.scaling = [(np.asarray(lo), np.asarray(hi)) for lo, hi in scaling]
    return out


def _scale(x, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def is_normalized(dataset: MultiViewDataset, tol: float = 1e-9) -> bool:
    return all(x.min() >= -tol and x.max() <= 1 + tol for x in dataset.views)


def inject_noise(dataset: MultiViewDataset, spec: NoiseSpec):
    """Contaminate floor(ratio * N) instances with x' = a * noise + (1 - a) * x.

    Returns the noisy dataset and a ledger holding the intensity applied to
    every (instance, view) cell (0 for untouched cells).
    """
    if spec.noise_kind is NoiseKind.UNIFORM_RANGE and not is_normalized(dataset):
        raise ArgumentError("uniform_range noise needs min-max normalized data")
    rng = np.random.default_rng(spec.seed)
    N, V = dataset.n, dataset.n_views
    alpha = np.zeros((N, V))
    n_rows = int(np.floor(spec.ratio * N + 1e-9))
    rows = np.sort(rng.choice(N, size=n_rows, replace=False))
    levels = np.asarray(spec.intensities)
    for i in rows:
        if spec.view_policy is ViewPolicy.ONE_RANDOM_VIEW:
            chosen = [int(rng.integers(V))]
        elif spec.view_policy is ViewPolicy.ALL_VIEWS:
            chosen = range(V)
        else:
            mask = rng.random(V) < 0.5
            if not mask.any():
                mask[rng.integers(V)] = True
            chosen = np.flatnonzero(mask)
        for v in chosen:
            alpha[i, v] = levels[rng.integers(len(levels))]

    views = []
    for v, x in enumerate(dataset.views):
        out = x.copy()
        hit = np.flatnonzero(alpha[:, v] > 0)
        if len(hit):
            a = alpha[hit, v][:, None]
            if spec.noise_kind is NoiseKind.UNIFORM_RANGE:
                delta = rng.random((len(hit), x.shape[1]))
            else:
                mu, sd = x.mean(axis=0), x.std(axis=0)
                delta = mu + sd * rng.standard_normal((len(hit), x.shape[1]))
            out[hit] = a * delta + (1.0 - a) * x[hit]
        views.append(out)
    noisy = MultiViewDataset(views, dataset.labels, dataset.names)
    noisy.scaling = dataset.scaling
    return noisy, NoiseLedger(alpha=alpha, seed=spec.seed, spec=spec)
