import numpy as np
import pytest
import torch

from robustmvc.config import PRESETS, TrainConfig
from robustmvc.data import NoiseSpec, generate_synthetic, inject_noise, normalize_features
from robustmvc.errors import ArgumentError, DataError
from robustmvc.metrics import group_means, quality_correlation
from robustmvc.quality import (
    IBModel,
    QualityScores,
    contamination_score,
    default_bottleneck,
    estimate_quality,
    quality_score,
    reconstruction_error,
    train_ib,
)

FAST = dict(n_clusters=4, ib_epochs=25)


@pytest.fixture(scope="module")
def scored_noisy():
    ds = normalize_features(generate_synthetic(4, 800, 3, [50, 30, 20], 6.0, seed=3))
    noisy, ledger = inject_noise(ds, NoiseSpec(0.5, seed=4))
    return estimate_quality(noisy, TrainConfig(**FAST)), ledger


class TestContamination:
    def test_arithmetic(self):
        np.testing.assert_array_equal(contamination_score([1, 3, 5]), [0, 0.5, 1])

    def test_constant(self):
        np.testing.assert_array_equal(contamination_score([2, 2, 2]), [0, 0, 0])

    def test_outlier_compresses_rest(self):
        R = np.r_[np.linspace(0, 1, 20), 100.0]
        C = contamination_score(R)
        assert np.all(C[:-1] <= 0.01) and C[-1] == 1

    def test_extremes_and_order(self, rng):
        R = rng.exponential(size=50)
        C = contamination_score(R)
        assert C.min() == 0 and C.max() == 1
        np.testing.assert_array_equal(np.argsort(C, kind="stable"), np.argsort(R, kind="stable"))


class TestQualityScore:
    @pytest.mark.parametrize("c, q", [(0.0, 1.0), (0.5, 0.25), (1.0, 0.0)])
    def test_values(self, c, q):
        assert quality_score(np.array([c]))[0] == q

    def test_strictly_decreasing(self):
        C = np.linspace(0, 1, 101)
        assert np.all(np.diff(quality_score(C)) < 0)

    @pytest.mark.parametrize("bad", [[-0.1], [1.2], [np.nan]])
    def test_out_of_range(self, bad):
        with pytest.raises(ArgumentError):
            quality_score(np.array(bad))


class TestReconstructionError:
    def test_identity_and_arithmetic(self):
        model = IBModel(2, 1, hidden=(4,))
        with torch.no_grad():
            for p in model.decoder.parameters():
                p.zero_()
            model.decoder[-1].bias.copy_(torch.tensor([0.5, 0.5]))
        assert reconstruction_error(model, np.array([[1.0, 0.0]]))[0] == pytest.approx(1.0)
        assert reconstruction_error(model, np.array([[0.5, 0.5]]))[0] == 0

    def test_deterministic(self, rng):
        model = IBModel(6, 2, hidden=(8,))
        x = rng.random((10, 6))
        assert reconstruction_error(model, x).tobytes() == reconstruction_error(model, x).tobytes()

    def test_dim_mismatch(self, rng):
        with pytest.raises(ArgumentError):
            reconstruction_error(IBModel(6, 2, hidden=(8,)), rng.random((3, 5)))


class TestTrainIB:
    def test_bottleneck_precondition(self):
        with pytest.raises(ArgumentError):
            IBModel(10, 10)
        with pytest.raises(ArgumentError):
            IBModel(10, 6)
        with pytest.raises(ArgumentError):
            IBModel(10, 0)
        IBModel(10, 5)

    def test_default_bottleneck(self):
        assert [default_bottleneck(d) for d in (3, 20, 50, 784)] == [1, 5, 12, 20]

    def test_loss_decreases_on_clean_data(self, blobs):
        model = train_ib(blobs.views[0], 10, TrainConfig(n_clusters=4, ib_epochs=15))
        assert len(model.losses) == 15
        assert model.losses[-1] < model.losses[0]

    def test_deterministic_in_seed(self, blobs):
        cfg = TrainConfig(n_clusters=4, ib_epochs=3, ib_hidden=(32, 16))
        a = reconstruction_error(train_ib(blobs.views[1], 5, cfg, seed=9), blobs.views[1])
        b = reconstruction_error(train_ib(blobs.views[1], 5, cfg, seed=9), blobs.views[1])
        assert a.tobytes() == b.tobytes()

    def test_does_not_touch_global_rng(self, blobs):
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        train_ib(blobs.views[2], 2, TrainConfig(n_clusters=4, ib_epochs=1, ib_hidden=(8,)))
        assert torch.equal(torch.rand(3), expected)


class TestEstimateQuality:
    def test_ranges_and_link(self, scored_noisy):
        q, _ = scored_noisy
        assert q.C.shape == q.Q.shape == (800, 3)
        for v in range(3):
            assert q.C[:, v].min() == 0 and q.C[:, v].max() == 1
        np.testing.assert_allclose(q.Q, (1 - q.C) ** 2)

    def test_group_means_nondecreasing(self, scored_noisy):
        q, ledger = scored_noisy
        levels = (0.2, 0.4, 0.6, 0.8, 1.0)
        for v in range(3):
            counts = [(np.isclose(ledger.alpha[:, v], a)).sum() for a in levels]
            assert min(counts) >= 50
            means = group_means(q.C[:, v], ledger.alpha[:, v], levels)
            assert np.all(np.diff(means) >= 0), means

    def test_correlation_with_ledger(self, scored_noisy):
        q, ledger = scored_noisy
        for r in quality_correlation(q.C, ledger):
            assert r["pearson"] >= 0.8

    def test_clean_data(self, blobs):
        # default estimator settings; the mean of a min-max scaled error is shape dependent
        q = estimate_quality(blobs, TrainConfig(n_clusters=4))
        assert np.all(q.C.mean(axis=0) < 0.3)
        ledger_alpha = np.zeros_like(q.C)
        assert all(r["pearson"] is None and r["spearman"] is None for r in quality_correlation(q.C, ledger_alpha))

    def test_bottleneck_override_checked(self, blobs):
        with pytest.raises(ArgumentError):
            estimate_quality(blobs, TrainConfig(n_clusters=4, bottleneck_dims=[5, 5]))
        with pytest.raises(ArgumentError):
            estimate_quality(blobs, TrainConfig(n_clusters=4, bottleneck_dims=[40, 5, 5]))

    def test_save_load(self, scored_noisy, tmp_path):
        q, _ = scored_noisy
        q.save(tmp_path / "q.json")
        back = QualityScores.load(tmp_path / "q.json")
        np.testing.assert_array_equal(back.Q, q.Q)
        assert back.bottleneck_dims == q.bottleneck_dims

    def test_load_rejects_garbage(self, tmp_path):
        (tmp_path / "q.json").write_text("{}")
        with pytest.raises(DataError):
            QualityScores.load(tmp_path / "q.json")


def test_benchmark_bottleneck_presets():
    assert PRESETS["scene15"]["bottleneck_dims"] == [7, 20]
    assert PRESETS["mnist_usps"]["bottleneck_dims"] == [520, 100]
