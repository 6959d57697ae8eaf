"""Local vector-valued polynomial fit over the frame and the projection g(0)."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import List, Optional

import numpy as np

from .errors import ConfigError, DegenerateNeighborhoodError, MmlsError
from .frame import (DEFAULT_MAX_ITERS, AffineFrame, FrameSolveReport, as_cloud,
                    find_local_frame, local_weights)
from .lsq import weighted_lstsq
from .weights import (DEFAULT_OVERSAMPLE, DEFAULT_TRIALS, EUCLIDEAN, MetricForm,
                      WeightFunction, estimate_sigma, poly_space_dim)

DEFAULT_SUPPORT_FACTOR = 2.0


def monomial_exponents(d, m):
    """Exponents of the monomials of total degree <= m, graded lexicographic."""
    rows = []
    for deg in range(m + 1):
        rows.extend(sorted((e for e in product(range(deg + 1), repeat=d) if sum(e) == deg),
                           reverse=True))
    return np.array(rows, dtype=int).reshape(-1, d)


def vandermonde(x, exponents):
    x = np.asarray(x, dtype=float)
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)


@dataclass
class PolynomialMap:
    """R^d -> R^n polynomial; coefficient row j multiplies monomial ``exponents[j]``."""

    d: int
    m: int
    coefficients: np.ndarray
    exponents: np.ndarray = None

    def __post_init__(self):
        if self.exponents is None:
            self.exponents = monomial_exponents(self.d, self.m)
        if self.coefficients.shape[0] != poly_space_dim(self.d, self.m):
            raise ValueError("coefficient rows do not match dim(Pi_m^d)")

    @property
    def n(self) -> int:
        return self.coefficients.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = vandermonde(np.atleast_2d(x).reshape(-1, self.d), self.exponents) @ self.coefficients
        return out[0] if single else out


def weighted_poly_fit(coords, values, weights, m, scale=1.0) -> PolynomialMap:
    """Weighted least-squares polynomial of total degree m for vector values.

    ``coords`` (I, d), ``values`` (I, n) or (I,). The monomials are evaluated on
    coords / scale for conditioning; the returned coefficients refer to the
    unscaled coordinates.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    d = coords.shape[1]
    exps = monomial_exponents(d, m)
    coef = weighted_lstsq(vandermonde(coords / scale, exps), values, weights)
    coef /= (float(scale) ** exps.sum(axis=1))[:, None]
    return PolynomialMap(d, m, coef, exps)


@dataclass(frozen=True)
class MmlsConfig:
    """Knobs for a projection run.

    ``sigma`` is the gaussian bandwidth or the bump support radius; ``None``
    means estimate it from the cloud (for the bump, the estimate is multiplied
    by ``support_factor``). ``fixed_iterations`` pins the frame search to that
    many steps instead of the eps stopping rule.
    """

    d: int
    m: int = 2
    weight: str = "gaussian"
    sigma: Optional[float] = None
    support_factor: float = DEFAULT_SUPPORT_FACTOR
    eps: Optional[float] = None
    max_iters: int = DEFAULT_MAX_ITERS
    fixed_iterations: Optional[int] = None
    metric: MetricForm = EUCLIDEAN
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    oversample: int = DEFAULT_OVERSAMPLE
    fallback: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.weight not in ("gaussian", "bump"):
            raise ConfigError(f"unknown weight kind {self.weight!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")

    def check_cloud(self, cloud):
        n = cloud.dim
        if self.d >= n:
            raise ConfigError(f"intrinsic dimension d={self.d} must be below ambient n={n}")
        self.metric.check_dim(n)

    def resolve(self, cloud) -> "MmlsConfig":
        """Copy with the bandwidth fixed (estimated from the cloud if needed)."""
        if self.sigma is not None:
            return self
        sigma = estimate_sigma(cloud, self.d, self.m, trials=self.trials,
                               oversample=self.oversample, rng_seed=self.seed,
                               metric=self.metric)
        if self.weight == "bump":
            sigma *= self.support_factor
        return replace(self, sigma=sigma)

    @property
    def theta(self) -> WeightFunction:
        if self.sigma is None:
            raise ConfigError("bandwidth not resolved; call resolve(cloud) first")
        if self.weight == "gaussian":
            return WeightFunction.gaussian(self.sigma)
        return WeightFunction.bump(self.sigma)


@dataclass
class ProjectionResult:
    projected: np.ndarray
    frame: Optional[AffineFrame] = None
    local_fit: Optional[PolynomialMap] = None
    effective_points: int = 0
    report: Optional[FrameSolveReport] = None
    degree_used: int = 0
    flags: List[str] = field(default_factory=list)
    error: Optional[MmlsError] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged


def _fit_with_fallback(coords, values, weights, m, scale, allow_fallback):
    for deg in range(m, 0, -1):
        try:
            return weighted_poly_fit(coords, values, weights, deg, scale=scale), deg
        except DegenerateNeighborhoodError:
            if not allow_fallback or deg == 1:
                raise
    raise AssertionError("unreachable")


def project_point(cloud, r, config: MmlsConfig, init_frame: Optional[AffineFrame] = None):
    """P_m(r): fit the frame, fit a degree-m map over it, evaluate at the origin."""
    cloud = as_cloud(cloud)
    config.check_cloud(cloud)
    config = config.resolve(cloud)
    theta = config.theta
    r = np.asarray(r, dtype=float).reshape(-1)
    frame, report = find_local_frame(
        cloud, r, config.d, theta, config.metric, eps=config.eps,
        max_iters=config.max_iters, fixed_iterations=config.fixed_iterations,
        init_origin=None if init_frame is None else init_frame.origin,
        init_basis=None if init_frame is None else init_frame.basis)
    return fit_over_frame(cloud, frame, config, report)


def fit_over_frame(cloud, frame: AffineFrame, config: MmlsConfig, report=None):
    cloud = as_cloud(cloud)
    theta = config.theta
    idx, w = local_weights(cloud.points, frame.origin, theta, config.metric)
    diff = cloud.points[idx] - frame.origin
    coords = diff @ frame.basis
    fit, deg = _fit_with_fallback(coords, diff, w, config.m, theta.scale, config.fallback)
    fit.coefficients[0] += frame.origin
    flags = []
    if deg < config.m:
        flags.append("degree-fallback")
    if report is not None and not report.converged:
        flags.append("not-converged")
    return ProjectionResult(
        projected=fit.coefficients[0].copy(), frame=frame, local_fit=fit,
        effective_points=len(idx), report=report, degree_used=deg, flags=flags)


def project_cloud(cloud, queries, config: MmlsConfig, workers: int = 1):
    """Project each query; failures are returned as flagged results, not raised."""
    cloud = as_cloud(cloud)
    config.check_cloud(cloud)
    queries = np.asarray(queries, dtype=float)
    if queries.size == 0:
        return []
    queries = queries.reshape(-1, cloud.dim)
    config = config.resolve(cloud)
    cloud.diameter  # computed once, before any fan-out

    def one(r):
        try:
            return project_point(cloud, r, config)
        except MmlsError as exc:
            return ProjectionResult(projected=np.full(cloud.dim, np.nan),
                                    flags=[exc.code], error=exc)

    if workers > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, queries))
    return [one(r) for r in queries]


def mls_function_approx(x_samples, f_samples, x, m, theta: WeightFunction, scale=None):
    """Classic moving least-squares value p_x(x) of scattered scalar data."""
    xs = np.asarray(x_samples, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    x = np.asarray(x, dtype=float).reshape(-1)
    f = np.asarray(f_samples, dtype=float).reshape(-1)
    idx, w = local_weights(xs, x, theta)
    fit = weighted_poly_fit(xs[idx] - x, f[idx], w, m,
                            scale=theta.scale if scale is None else scale)
    return float(fit.coefficients[0, 0])
