import numpy as np
import pytest

from robustmvc.data import NoiseSpec, generate_synthetic, inject_noise, normalize_features


@pytest.fixture(scope="session")
def blobs():
    return normalize_features(generate_synthetic(4, 400, 3, [50, 30, 20], 6.0, seed=0))


@pytest.fixture(scope="session")
def noisy_blobs(blobs):
    return inject_noise(blobs, NoiseSpec(0.5, seed=1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
