import numpy as np
import pytest

from mmls import MmlsConfig, PointCloud
from mmls.harness import NoiseModel, SyntheticManifold, sample_manifold


@pytest.fixture(scope="session")
def helix_cloud():
    """The noisy-helix configuration: 400 points, U(-0.2, 0.2) noise."""
    return sample_manifold(SyntheticManifold("helix"), 400,
                           noise=NoiseModel("uniform-box", 0.2, seed=0), seed=0)


@pytest.fixture(scope="session")
def helix_config(helix_cloud):
    return MmlsConfig(d=1, m=2).resolve(helix_cloud)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_plane_cloud(rng, n, d, count):
    basis, _ = np.linalg.qr(rng.standard_normal((n, d)))
    origin = rng.standard_normal(n)
    coords = rng.uniform(-1, 1, (count, d))
    return PointCloud(origin + coords @ basis.T), origin, basis


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(label, passed, detail)."""

    def record(label, passed, detail=""):
        ACCEPTANCE[label] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: (int(s.split()[0].rstrip("abc")), s)):
        passed, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
