import csv
import json

import numpy as np
import pytest

from robustmvc.cli import main
from robustmvc.data import load_dataset

TINY = ["--set", "latent_dim=8", "--set", "ae_hidden=[16]", "--set", "assign_hidden=8", "--set", "ib_hidden=[16]",
        "--set", "ib_epochs=2", "--set", "epochs=3", "--set", "warmup_epochs=1", "--set", "batch_size=32"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--clusters", "3", "--n", "120", "--dims", "12,8", "--seed", "1",
                 "--out", str(root / "gen")]) == 0
    assert main(["inject", "--data", str(root / "gen" / "data"), "--ratio", "0.5", "--seed", "2",
                 "--out", str(root / "inj")]) == 0
    assert main(["train", "--data", str(root / "inj" / "data"), "--clusters", "3", *TINY,
                 "--out", str(root / "train")]) == 0
    return root


def _manifest(path):
    return json.loads((path / "manifest.json").read_text())


def _reachable(run_dir):
    m = _manifest(run_dir)
    for rel in m["outputs"].values():
        assert (run_dir / rel).exists(), rel
    return m


class TestInject:
    def test_ledger_levels_and_summary(self, workspace, capsys):
        assert main(["inject", "--data", str(workspace / "gen" / "data"), "--ratio", "0.5",
                     "--alphas", "0.2,0.4,0.6,0.8,1.0", "--seed", "3", "--out", str(workspace / "inj5")]) == 0
        out = capsys.readouterr().out
        assert out.count("alpha=") == 5
        ledger = json.loads((workspace / "inj5" / "ledger.json").read_text())
        assert sorted({a for row in ledger["alpha"] for a in row} - {0.0}) == [0.2, 0.4, 0.6, 0.8, 1.0]
        m = _reachable(workspace / "inj5")
        assert m["ledger"] == "ledger.json"

    def test_zero_ratio_identity(self, workspace):
        assert main(["inject", "--data", str(workspace / "gen" / "data"), "--ratio", "0", "--seed", "3",
                     "--out", str(workspace / "inj0")]) == 0
        src, dst = load_dataset(workspace / "gen" / "data"), load_dataset(workspace / "inj0" / "data")
        for a, b in zip(src.views, dst.views):
            np.testing.assert_array_equal(a, b)
        ledger = json.loads((workspace / "inj0" / "ledger.json").read_text())
        assert not np.any(ledger["alpha"])

    def test_byte_identical_reruns(self, workspace):
        for name in ("a", "b"):
            assert main(["inject", "--data", str(workspace / "gen" / "data"), "--ratio", "0.3", "--seed", "4",
                         "--out", str(workspace / f"rep_{name}")]) == 0
        for f in sorted((workspace / "rep_a").rglob("*")):
            if f.is_file():
                twin = workspace / "rep_b" / f.relative_to(workspace / "rep_a")
                assert f.read_bytes() == twin.read_bytes(), f.name

    def test_seed_from_environment(self, workspace, monkeypatch):
        monkeypatch.setenv("ROBUSTMVC_SEED", "4")
        assert main(["inject", "--data", str(workspace / "gen" / "data"), "--ratio", "0.3",
                     "--out", str(workspace / "rep_env")]) == 0
        assert (workspace / "rep_env" / "ledger.json").read_bytes() == (workspace / "rep_a" / "ledger.json").read_bytes()


class TestTrain:
    def test_outputs_and_manifest(self, workspace):
        m = _reachable(workspace / "train")
        assert {"checkpoint", "quality", "history", "config", "metrics"} <= set(m["outputs"])
        assert m["config"]["n_clusters"] == 3 and m["version"]
        assert len(m["dataset_fingerprint"]) == 64

    def test_zero_epochs(self, workspace):
        assert main(["train", "--data", str(workspace / "gen" / "data"), "--clusters", "3", *TINY,
                     "--set", "epochs=0", "--set", "warmup_epochs=0", "--out", str(workspace / "t0")]) == 0
        assert json.loads((workspace / "t0" / "history.json").read_text()) == []

    def test_config_file(self, workspace, tmp_path):
        (tmp_path / "c.yaml").write_text("n_clusters: 3\nepochs: 1\nwarmup_epochs: 0\nib_epochs: 1\n"
                                         "ae_hidden: [8]\nib_hidden: [8]\nlatent_dim: 4\n")
        assert main(["train", "--data", str(workspace / "gen" / "data"), "--config", str(tmp_path / "c.yaml"),
                     "--out", str(tmp_path / "run")]) == 0
        assert len(json.loads((tmp_path / "run" / "history.json").read_text())) == 1

    def test_missing_cluster_count(self, workspace, tmp_path, capsys):
        assert main(["train", "--data", str(workspace / "gen" / "data"), "--out", str(tmp_path)]) == 2
        assert "n_clusters" in capsys.readouterr().err

    def test_bad_field_type(self, workspace, tmp_path, capsys):
        code = main(["train", "--data", str(workspace / "gen" / "data"), "--clusters", "3",
                     "--set", "kernel={rel: wide}", "--out", str(tmp_path)])
        assert code == 2 and "kernel.rel" in capsys.readouterr().err


class TestEvaluate:
    def test_with_ledger(self, workspace):
        assert main(["evaluate", "--checkpoint", str(workspace / "train" / "checkpoint.pt"),
                     "--data", str(workspace / "inj" / "data"), "--ledger", str(workspace / "inj" / "ledger.json"),
                     "--out", str(workspace / "ev")]) == 0
        rec = json.loads((workspace / "ev" / "metrics.json").read_text())
        assert all(0 <= rec["clustering"][k] <= 1 for k in ("ACC", "NMI"))
        assert len(rec["correlation"]) == 2
        _reachable(workspace / "ev")

    def test_without_labels(self, workspace, tmp_path):
        data = tmp_path / "nolabels"
        data.mkdir()
        for f in (workspace / "inj" / "data").glob("*.csv"):
            (data / f.name).write_bytes(f.read_bytes())
        assert main(["evaluate", "--checkpoint", str(workspace / "train" / "checkpoint.pt"), "--data", str(data),
                     "--ledger", str(workspace / "inj" / "ledger.json"), "--out", str(tmp_path / "ev")]) == 0
        rec = json.loads((tmp_path / "ev" / "metrics.json").read_text())
        assert "clustering" not in rec and "correlation" in rec

    def test_dim_mismatch(self, workspace, tmp_path):
        main(["generate", "--clusters", "3", "--n", "30", "--dims", "12,9", "--out", str(tmp_path / "g")])
        assert main(["evaluate", "--checkpoint", str(workspace / "train" / "checkpoint.pt"),
                     "--data", str(tmp_path / "g" / "data"), "--out", str(tmp_path / "ev")]) == 2


class TestReports:
    def test_export_boxdata(self, workspace):
        assert main(["export", "--checkpoint", str(workspace / "train" / "checkpoint.pt"),
                     "--data", str(workspace / "inj" / "data"), "--what", "boxdata",
                     "--ledger", str(workspace / "inj" / "ledger.json"), "--out", str(workspace / "box")]) == 0
        rows = list(csv.DictReader(open(workspace / "box" / "boxdata.csv")))
        assert {r["alpha"] for r in rows} == {"0.0", "0.2", "0.4", "0.6", "0.8", "1.0"}
        assert (workspace / "box" / "boxplot.png").stat().st_size > 0
        _reachable(workspace / "box")

    @pytest.mark.parametrize("what, files", [("embeddings", ["H.csv", "G.csv", "Z0.csv"]),
                                             ("quality", ["R.csv", "C.csv", "Q.csv"])])
    def test_export_matrices(self, workspace, what, files):
        out = workspace / f"exp_{what}"
        assert main(["export", "--checkpoint", str(workspace / "train" / "checkpoint.pt"),
                     "--data", str(workspace / "inj" / "data"), "--what", what, "--out", str(out)]) == 0
        for f in files:
            assert (out / f).exists()

    def test_boxdata_needs_ledger(self, workspace, tmp_path):
        assert main(["export", "--checkpoint", str(workspace / "train" / "checkpoint.pt"),
                     "--data", str(workspace / "inj" / "data"), "--what", "boxdata", "--out", str(tmp_path)]) == 1

    def test_ablate_and_sweep(self, workspace):
        data = str(workspace / "inj" / "data")
        assert main(["ablate", "--data", data, "--clusters", "3", *TINY, "--settings", "full", "wo_mi",
                     "--seeds", "0,1", "--out", str(workspace / "abl")]) == 0
        rows = list(csv.DictReader(open(workspace / "abl" / "ablation.csv")))
        assert [(r["setting"], r["seed"]) for r in rows] == [("full", "0"), ("wo_mi", "0"), ("full", "1"),
                                                            ("wo_mi", "1")]
        _reachable(workspace / "abl")
        assert main(["sweep", "--data", data, "--clusters", "3", *TINY, "--param", "tau",
                     "--values", "0.1,1", "--out", str(workspace / "sw")]) == 0
        assert len(list(csv.DictReader(open(workspace / "sw" / "sweep.csv")))) == 2
        _reachable(workspace / "sw")


class TestUsage:
    @pytest.mark.parametrize("argv", [[], ["bogus"], ["inject", "--ratio", "0.5"],
                                      ["inject", "--data", "x", "--ratio", "half", "--out", "y"]])
    def test_usage_errors(self, argv):
        assert main(argv) == 1

    def test_bad_ratio_is_usage(self, workspace, tmp_path):
        assert main(["inject", "--data", str(workspace / "gen" / "data"), "--ratio", "1.5",
                     "--out", str(tmp_path)]) == 1

    def test_missing_data_dir(self, tmp_path):
        assert main(["inject", "--data", str(tmp_path / "none"), "--ratio", "0.5", "--out", str(tmp_path)]) == 2

    def test_unknown_ablation(self, workspace, tmp_path):
        assert main(["ablate", "--data", str(workspace / "inj" / "data"), "--clusters", "3",
                     "--settings", "wo_everything", "--out", str(tmp_path)]) == 1
