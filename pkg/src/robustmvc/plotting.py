"""Static figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "savefig.bbox": "tight",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _figure(ncols=1, width=3.4, height=2.6):
    with plt.rc_context(STYLE):
        return plt.subplots(1, ncols, figsize=(width * ncols, height), squeeze=False)


def _save(fig, path):
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def quality_boxplot(box_rows, path, view_names=None):
    """Contamination score distribution per intensity level, one panel per view.

    ``box_rows`` are the records produced by ``metrics.box_statistics``.
    """
    views = sorted({r["view"] for r in box_rows})
    fig, axes = _figure(len(views))
    for ax, v in zip(axes[0], views):
        rows = sorted((r for r in box_rows if r["view"] == v), key=lambda r: r["alpha"])
        stats = [{"med": r["median"], "q1": r["q1"], "q3": r["q3"], "whislo": r["min"], "whishi": r["max"],
                  "mean": r["mean"], "label": f"{r['alpha']:.1f}"} for r in rows]
        ax.bxp(stats, showfliers=False, showmeans=True)
        ax.set_xlabel("noise intensity")
        ax.set_ylabel("contamination score")
        ax.set_title(view_names[v] if view_names else f"view {v}")
        ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)


def sweep_plot(rows, param, path):
    """Metric curves over a log-spaced hyperparameter grid."""
    fig, axes = _figure()
    ax = axes[0, 0]
    xs = np.array([r["value"] for r in rows], dtype=float)
    order = np.argsort(xs)
    for metric in ("ACC", "NMI", "ARI"):
        ax.plot(xs[order], np.array([r[metric] for r in rows])[order], marker="o", label=metric)
    if np.all(xs > 0):
        ax.set_xscale("log")
    ax.set_xlabel(param)
    ax.set_ylim(0, 1.02)
    ax.legend(frameon=False)
    return _save(fig, path)


def ablation_plot(rows, path):
    """Grouped bars of mean ACC/NMI/ARI per ablation setting."""
    settings = list(dict.fromkeys(r["setting"] for r in rows))
    metrics = ("ACC", "NMI", "ARI")
    means = np.array([[np.mean([r[m] for r in rows if r["setting"] == s]) for m in metrics] for s in settings])
    fig, axes = _figure(width=max(3.4, 0.6 * len(settings)))
    ax = axes[0, 0]
    x = np.arange(len(settings))
    for j, m in enumerate(metrics):
        ax.bar(x + (j - 1) * 0.27, means[:, j], width=0.27, label=m)
    ax.set_xticks(x, settings, rotation=30, ha="right")
    ax.set_ylim(0, 1.02)
    ax.legend(frameon=False, ncol=3)
    return _save(fig, path)


def history_plot(records, path):
    """Per-epoch loss terms with the warm-up boundary marked."""
    fig, axes = _figure(width=4.2)
    ax = axes[0, 0]
    epochs = [r["epoch"] for r in records]
    for key in ("total", "rec", "rcl", "mi", "ddc"):
        ys = [r.get(key) for r in records]
        if any(y is not None for y in ys):
            ax.plot(epochs, [np.nan if y is None else y for y in ys], label=key)
    first_formal = next((r["epoch"] for r in records if r["phase"] == "formal"), None)
    if first_formal is not None:
        ax.axvline(first_formal, color="grey", ls=":", lw=1)
    ax.set_yscale("symlog")
    ax.set_xlabel("epoch")
    ax.legend(frameon=False, ncol=2)
    return _save(fig, path)
