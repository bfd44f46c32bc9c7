"""Command-line entry point: ``robustmvc <command> ... --out DIR``.

Every command writes into a single output directory and finishes with a
``manifest.json`` listing the config echo, dataset fingerprint, ledger
reference and every file produced. Exit status: 0 success, 1 usage,
2 data/schema/compatibility problems, 3 anything else at runtime.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import TrainConfig
from .data import (
    NoiseKind,
    NoiseLedger,
    NoiseSpec,
    DEFAULT_INTENSITIES,
    ViewPolicy,
    generate_synthetic,
    inject_noise,
    load_dataset,
    normalize_features,
    save_dataset,
)
from .errors import ArgumentError, DataError, SchemaError
from .metrics import box_statistics, clustering_metrics, quality_correlation
from .trainer import (
    Ablation,
    embed,
    labels_from_assignments,
    load_checkpoint,
    predict,
    prepare,
    compute_quality,
    run_ablation,
    save_checkpoint,
    save_history,
    score_quality,
    train,
)
from .utils import SEED_ENV, default_seed

log = logging.getLogger("robustmvc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
SWEEP_PARAMS = ("lambda1", "lambda2", "lambda3", "tau")
SWEEP_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- small helpers ----------------------------------------------------------------

def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _override(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), yaml.safe_load(value)


def _write_csv(path, rows, fields=None):
    fields = fields or list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return path


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


class Run:
    """Output directory plus the manifest that indexes it."""

    def __init__(self, out, command):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {"command": command, "version": __version__, "config": None,
                         "dataset_fingerprint": None, "ledger": None, "inputs": {}, "outputs": {}}

    def path(self, name):
        return self.out / name

    def add(self, key, path):
        self.manifest["outputs"][key] = Path(path).relative_to(self.out).as_posix()
        return path

    def finish(self):
        _write_json(self.out / "manifest.json", self.manifest)
        return self.out / "manifest.json"


def _load_config(args):
    """Config file plus command-line overrides; the seed falls back to the environment."""
    doc = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = (json.loads if path.suffix == ".json" else yaml.safe_load)(path.read_text()) or {}
        except (ValueError, yaml.YAMLError) as exc:
            raise SchemaError("<root>", f"cannot parse {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise SchemaError("<root>", "config must be a mapping")
    doc.update(dict(args.set or []))
    if args.clusters is not None:
        doc["n_clusters"] = args.clusters
    if args.seed is not None:
        doc["seed"] = args.seed
    doc.setdefault("seed", default_seed())
    return TrainConfig.from_dict(doc)


def _seeds(args, cfg):
    return args.seeds if args.seeds else [cfg.seed]


# -- commands ---------------------------------------------------------------------

def cmd_generate(args):
    seed = default_seed() if args.seed is None else args.seed
    ds = generate_synthetic(args.clusters, args.n, len(args.dims), args.dims, args.separation, seed, args.view_noise)
    if args.normalize:
        ds = normalize_features(ds)
    run = Run(args.out, "generate")
    for p in save_dataset(ds, run.path("data"), args.format):
        run.add(p.stem, p)
    run.manifest["config"] = {"clusters": args.clusters, "n": args.n, "dims": args.dims, "separation": args.separation,
                              "seed": seed, "view_noise": args.view_noise, "normalize": args.normalize}
    run.manifest["dataset_fingerprint"] = ds.fingerprint()
    run.finish()
    print(f"wrote {ds.n} x {ds.dims} dataset to {run.path('data')}")


def cmd_inject(args):
    ds = load_dataset(args.data)
    seed = default_seed() if args.seed is None else args.seed
    spec = NoiseSpec(args.ratio, tuple(args.alphas), args.kind, args.policy, seed)
    noisy, ledger = inject_noise(ds, spec)
    run = Run(args.out, "inject")
    fmt = "bin" if any(p.suffix == ".bin" for p in Path(args.data).iterdir()) else "csv"
    for p in save_dataset(noisy, run.path("data"), fmt):
        run.add(p.stem, p)
    ledger.save(run.add("ledger", run.path("ledger.json")))
    counts = ledger.counts()
    run.manifest.update(config=spec.to_dict(), dataset_fingerprint=noisy.fingerprint(), ledger="ledger.json")
    run.manifest["inputs"] = {"data": str(args.data), "fingerprint": ds.fingerprint()}
    run.finish()
    print(f"contaminated {len(ledger.contaminated_rows)} of {ds.n} instances")
    for alpha, n in counts.items():
        print(f"  alpha={alpha}: {n} cells")


def cmd_train(args):
    ds = load_dataset(args.data)
    cfg = _load_config(args)
    run = Run(args.out, "train")
    model, quality, history = train(ds, cfg)
    save_checkpoint(model, run.add("checkpoint", run.path("checkpoint.pt")))
    quality.save(run.add("quality", run.path("quality.json")))
    save_history(history, run.add("history", run.path("history.json")))
    if history.records:
        _write_csv(run.add("history_csv", run.path("history.csv")), history.records)
        from .plotting import history_plot
        history_plot(history.records, run.add("history_plot", run.path("history.png")))
    cfg.save(run.add("config", run.path("config.yaml")))
    run.manifest.update(config=cfg.to_dict(), dataset_fingerprint=ds.fingerprint())
    run.manifest["inputs"] = {"data": str(args.data)}
    if ds.labels is not None:
        result = predict(model, ds, quality)
        _write_json(run.add("metrics", run.path("metrics.json")), result.metrics)
        print(" ".join(f"{k}={v:.4f}" for k, v in result.metrics.items()))
    run.finish()
    print(f"trained {len(history)} epochs; outputs in {run.out}")


def _evaluate(model, ds, ledger_path):
    quality = score_quality(model, ds)
    record = {}
    out = embed(model, ds, quality)
    labels = labels_from_assignments(out["G"])
    if ds.labels is not None:
        record["clustering"] = clustering_metrics(labels, ds.labels)
    if ledger_path:
        ledger = NoiseLedger.load(ledger_path)
        if ledger.alpha.shape != (ds.n, ds.n_views):
            raise DataError(f"ledger shape {ledger.alpha.shape} does not match data {(ds.n, ds.n_views)}")
        record["correlation"] = quality_correlation(quality.C, ledger)
    return record, quality, labels


def cmd_evaluate(args):
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    record, _, labels = _evaluate(model, ds, args.ledger)
    run = Run(args.out, "evaluate")
    _write_json(run.add("metrics", run.path("metrics.json")), record)
    np.savetxt(run.add("labels", run.path("labels.txt")), labels, fmt="%d")
    if "clustering" in record:
        _write_csv(run.add("metrics_csv", run.path("metrics.csv")), [record["clustering"]])
        print(" ".join(f"{k}={v:.4f}" for k, v in record["clustering"].items()))
    if "correlation" in record:
        _write_csv(run.add("correlation_csv", run.path("correlation.csv")), record["correlation"])
        for r in record["correlation"]:
            print(f"view {r['view']}: pearson={r['pearson']} spearman={r['spearman']}")
    run.manifest.update(config=model.config.to_dict(), dataset_fingerprint=ds.fingerprint(),
                        ledger=str(args.ledger) if args.ledger else None)
    run.manifest["inputs"] = {"checkpoint": str(args.checkpoint), "data": str(args.data)}
    run.finish()


def _labelled(args):
    ds = load_dataset(args.data)
    if ds.labels is None:
        raise DataError(f"{args.data}: labels.txt is required for this command")
    return ds


def cmd_ablate(args):
    ds = _labelled(args)
    cfg = _load_config(args)
    settings = [a.value for a in Ablation] if args.settings == ["all"] else args.settings
    for s in settings:
        if s not in {a.value for a in Ablation}:
            raise UsageError(f"unknown ablation setting {s!r}; choose from {[a.value for a in Ablation]}")
    run = Run(args.out, "ablate")
    rows = []
    for seed in _seeds(args, cfg):
        base = cfg.replace(seed=seed)
        # one quality estimate per seed, shared by every arm
        quality, _ = compute_quality(prepare(ds, base), base)
        for s in settings:
            row = run_ablation(ds, base, s, quality=quality)
            rows.append(row)
            print(f"seed {seed} {s:12s} ACC={row['ACC']:.4f} NMI={row['NMI']:.4f} ARI={row['ARI']:.4f}")
    _write_csv(run.add("table", run.path("ablation.csv")), rows, ["setting", "seed", "ACC", "NMI", "ARI"])
    summary = _summarise(rows, "setting")
    _write_csv(run.add("summary", run.path("ablation_summary.csv")), summary)
    from .plotting import ablation_plot
    ablation_plot(rows, run.add("figure", run.path("ablation.png")))
    run.manifest.update(config=cfg.to_dict(), dataset_fingerprint=ds.fingerprint())
    run.manifest["inputs"] = {"data": str(args.data)}
    run.finish()


def cmd_sweep(args):
    ds = _labelled(args)
    cfg = _load_config(args)
    run = Run(args.out, "sweep")
    quality, _ = compute_quality(prepare(ds, cfg), cfg)
    rows = []
    for value in args.values:
        model, _, _ = train(ds, cfg.replace(**{args.param: value}), quality=quality)
        metrics = predict(model, ds, quality).metrics
        rows.append({"param": args.param, "value": value, "seed": cfg.seed, **metrics})
        print(f"{args.param}={value:g} ACC={metrics['ACC']:.4f} NMI={metrics['NMI']:.4f} ARI={metrics['ARI']:.4f}")
    _write_csv(run.add("table", run.path("sweep.csv")), rows)
    from .plotting import sweep_plot
    sweep_plot(rows, args.param, run.add("figure", run.path("sweep.png")))
    run.manifest.update(config=cfg.to_dict(), dataset_fingerprint=ds.fingerprint())
    run.manifest["inputs"] = {"data": str(args.data)}
    run.finish()


def cmd_export(args):
    model = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    run = Run(args.out, "export")
    quality = score_quality(model, ds)
    if args.what == "embeddings":
        out = embed(model, ds, quality)
        np.savetxt(run.add("H", run.path("H.csv")), out["H"], delimiter=",", fmt="%.8g")
        np.savetxt(run.add("G", run.path("G.csv")), out["G"], delimiter=",", fmt="%.8g")
        for v, z in enumerate(out["Z"]):
            np.savetxt(run.add(f"Z{v}", run.path(f"Z{v}.csv")), z, delimiter=",", fmt="%.8g")
        np.savetxt(run.add("labels", run.path("labels.txt")), labels_from_assignments(out["G"]), fmt="%d")
    elif args.what == "quality":
        for name, mat in (("R", quality.R), ("C", quality.C), ("Q", quality.Q)):
            header = ",".join(ds.view_name(v) for v in range(ds.n_views))
            np.savetxt(run.add(name, run.path(f"{name}.csv")), mat, delimiter=",", fmt="%.10g",
                       header=header, comments="")
    else:
        if not args.ledger:
            raise UsageError("--what boxdata needs --ledger")
        ledger = NoiseLedger.load(args.ledger)
        if ledger.alpha.shape != quality.C.shape:
            raise DataError(f"ledger shape {ledger.alpha.shape} does not match data {quality.C.shape}")
        rows = box_statistics(quality.C, ledger)
        for r in rows:
            r["view_name"] = ds.view_name(r["view"])
        _write_csv(run.add("boxdata", run.path("boxdata.csv")), rows)
        _write_csv(run.add("correlation", run.path("correlation.csv")), quality_correlation(quality.C, ledger))
        from .plotting import quality_boxplot
        quality_boxplot(rows, run.add("figure", run.path("boxplot.png")), ds.names)
        run.manifest["ledger"] = str(args.ledger)
    run.manifest.update(config=model.config.to_dict(), dataset_fingerprint=ds.fingerprint())
    run.manifest["inputs"] = {"checkpoint": str(args.checkpoint), "data": str(args.data)}
    run.finish()
    print(f"exported {args.what} to {run.out}")


def _summarise(rows, key):
    out = []
    for k in dict.fromkeys(r[key] for r in rows):
        group = [r for r in rows if r[key] == k]
        rec = {key: k, "runs": len(group)}
        for m in ("ACC", "NMI", "ARI"):
            vals = np.array([r[m] for r in group])
            rec[f"{m}_mean"], rec[f"{m}_std"] = float(vals.mean()), float(vals.std())
        out.append(rec)
    return out


# -- parser -----------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="robustmvc", description="Quality-aware multi-view clustering toolkit.",
                epilog=f"Default seed comes from ${SEED_ENV} when --seed is not given.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="YAML or JSON file with TrainConfig fields")
        sp.add_argument("--clusters", type=int, help="cluster count K (overrides the config)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", type=_override, metavar="KEY=VALUE",
                        help="override one config field; repeatable")

    g = sub.add_parser("generate", help="synthetic multi-view blobs")
    g.add_argument("--clusters", type=int, default=5)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--dims", type=_ints, default=[50, 30, 20])
    g.add_argument("--separation", type=float, default=6.0)
    g.add_argument("--view-noise", type=float, default=0.1)
    g.add_argument("--no-normalize", dest="normalize", action="store_false")
    g.add_argument("--format", choices=("csv", "bin"), default="csv")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("inject", help="contaminate a dataset and write the noise ledger")
    i.add_argument("--data", required=True)
    i.add_argument("--ratio", type=float, required=True)
    i.add_argument("--alphas", type=_floats, default=list(DEFAULT_INTENSITIES))
    i.add_argument("--policy", choices=[v.value for v in ViewPolicy], default=ViewPolicy.ALL_VIEWS.value)
    i.add_argument("--kind", choices=[k.value for k in NoiseKind], default=NoiseKind.UNIFORM_RANGE.value)
    i.add_argument("--seed", type=int)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_inject)

    t = sub.add_parser("train", help="estimate quality and train the clustering model")
    t.add_argument("--data", required=True)
    with_config(t)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="clustering metrics and quality correlations")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--ledger")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", help="train every ablation arm")
    a.add_argument("--data", required=True)
    with_config(a)
    a.add_argument("--settings", nargs="+", default=["all"])
    a.add_argument("--seeds", type=_ints)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("sweep", help="metrics over a grid of one hyperparameter")
    s.add_argument("--data", required=True)
    with_config(s)
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--values", type=_floats, default=list(SWEEP_GRID))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    x = sub.add_parser("export", help="plot-ready embeddings, quality scores or box statistics")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--data", required=True)
    x.add_argument("--what", choices=("embeddings", "quality", "boxdata"), required=True)
    x.add_argument("--ledger")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArgumentError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
