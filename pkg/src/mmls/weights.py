"""Weight kernels, distance forms and the Monte-Carlo bandwidth estimate."""

from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DomainError, InsufficientDataError

DEFAULT_TRIALS = 100
DEFAULT_OVERSAMPLE = 10


@dataclass(frozen=True)
class WeightFunction:
    """Radial kernel theta(t).

    ``gaussian``: exp(-t^2 / sigma^2).
    ``bump``: exp(-t^2 / (s^2 - t^2)) for t < s and exactly 0 beyond, where s
    is ``support``. Both equal 1 at t = 0 and are non-increasing.
    """

    kind: str = "gaussian"
    sigma: Optional[float] = None
    support: Optional[float] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma is None or not self.sigma > 0:
                raise ConfigError("gaussian weight needs sigma > 0")
        elif self.kind in ("bump", "compact-bump"):
            object.__setattr__(self, "kind", "bump")
            if self.support is None or not self.support > 0:
                raise ConfigError("bump weight needs support > 0")
        else:
            raise ConfigError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", sigma=float(sigma))

    @classmethod
    def bump(cls, support):
        return cls("bump", support=float(support))

    @property
    def scale(self) -> float:
        """Characteristic length of the kernel."""
        return self.sigma if self.kind == "gaussian" else self.support

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-(t / self.sigma) ** 2)
        s2 = self.support ** 2
        t2 = t * t
        inside = t2 < s2
        out = np.zeros_like(t2)
        out[inside] = np.exp(-t2[inside] / (s2 - t2[inside]))
        return out


def eval_weight(theta: WeightFunction, t: float) -> float:
    t = float(t)
    if not t >= 0:
        raise DomainError(f"weight argument must be a nonnegative distance, got {t}")
    return float(theta(t))


@dataclass(frozen=True, eq=False)
class MetricForm:
    """Distance ``sqrt((x-y)^T A (x-y))`` stored through a factor L with A = L L^T.

    ``euclidean`` has L = I. ``spd`` takes a symmetric positive definite A.
    ``reduced`` measures distance inside the span of an orthonormal basis V
    (A = V V^T, positive semidefinite); used to localise noisy high-dimensional
    data by distances in a few leading principal directions.
    """

    kind: str = "euclidean"
    matrix: Optional[np.ndarray] = None
    factor: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "euclidean":
            return
        if self.kind in ("spd", "spd-form"):
            object.__setattr__(self, "kind", "spd")
            a = np.asarray(self.matrix, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ConfigError("metric matrix must be square")
            if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12 * np.abs(a).max()):
                raise ConfigError("metric matrix must be symmetric")
            evals = np.linalg.eigvalsh(a)
            if evals.min() <= 0:
                raise ConfigError("metric matrix must be positive definite")
            a = 0.5 * (a + a.T)
            object.__setattr__(self, "matrix", a)
            object.__setattr__(self, "factor", np.linalg.cholesky(a))
        elif self.kind == "reduced":
            v = np.asarray(self.factor, dtype=float)
            if v.ndim != 2:
                raise ConfigError("reduced metric needs an (n, k) basis")
            object.__setattr__(self, "factor", v)
            object.__setattr__(self, "matrix", v @ v.T)
        else:
            raise ConfigError(f"unknown metric kind {self.kind!r}")

    @classmethod
    def spd(cls, matrix):
        return cls("spd", matrix=matrix)

    @classmethod
    def reduced(cls, basis):
        return cls("reduced", factor=basis)

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean"

    def check_dim(self, n):
        if self.factor is not None and self.factor.shape[0] != n:
            raise ConfigError(
                f"metric is {self.factor.shape[0]}-dimensional but data is {n}-dimensional")

    def transform(self, x):
        """Map points to coordinates in which the metric is Euclidean."""
        x = np.asarray(x, dtype=float)
        return x if self.factor is None else x @ self.factor

    def distances(self, points, center):
        diff = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
        if self.factor is not None:
            diff = diff @ self.factor
        return np.sqrt(np.einsum("...j,...j->...", diff, diff))

    def distance(self, x, y) -> float:
        return float(self.distances(np.atleast_2d(x), y)[0])


EUCLIDEAN = MetricForm()


def poly_space_dim(d: int, m: int) -> int:
    """dim of the d-variate polynomials of total degree <= m."""
    return comb(m + d, d)


def estimate_sigma(cloud, d, m, trials=DEFAULT_TRIALS, oversample=DEFAULT_OVERSAMPLE,
                   rng_seed=0, metric=EUCLIDEAN, return_details=False):
    """Monte-Carlo bandwidth: worst-case radius holding enough neighbors.

    Draws ``trials`` sample points (with replacement). For each, the radius of
    the smallest ball around it containing ``oversample * dim(Pi_m^d)`` cloud
    points (the point itself included) is found; the largest radius is the
    bandwidth.
    """
    points = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, dtype=float)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if oversample < 1:
        raise ConfigError("oversample must be >= 1")
    k = int(oversample) * poly_space_dim(d, m)
    size = len(points)
    if size < k:
        raise InsufficientDataError(
            f"bandwidth estimate needs at least {k} points "
            f"({oversample} x dim(Pi_{m}^{d}) = {oversample} x {poly_space_dim(d, m)}), "
            f"cloud has {size}", required=k, available=size)
    rng = np.random.default_rng(rng_seed)
    picks = rng.integers(0, size, size=trials)
    coords = metric.transform(points)
    tree = cKDTree(coords)
    dist, _ = tree.query(coords[picks], k=[k])
    radii = dist[:, 0]
    sigma = float(radii.max())
    if return_details:
        return sigma, {"neighbors": k, "trials": trials, "picks": picks, "radii": radii}
    return sigma
