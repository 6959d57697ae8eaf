"""Synthetic manifolds, noise, error metrics and the experiment drivers."""

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .cloud import PointCloud
from .errors import ConfigError, DomainError
from .project import MmlsConfig, project_cloud, project_point
from .weights import MetricForm
from .wpca import top_left_singular

KINDS = ("helix", "circle", "sphere", "torus", "plane", "ellipse-images")


@dataclass(frozen=True)
class SyntheticManifold:
    """A known manifold with a sampler and a distance function.

    helix: (R sin t, R cos t, c t), t in [t_min, t_max].
    circle: radius R in the first two coordinates of R^n.
    sphere: 2-sphere of radius R in the first three coordinates of R^n.
    torus: major radius R, tube radius ``minor`` in R^3.
    plane: a ``d``-dimensional affine plane in R^n with a seeded random
        orientation; samples cover [-1, 1]^d in plane coordinates.
    ellipse-images: ``side`` x ``side`` grey images of centred axis-aligned
        ellipses with semi-axes in ``axes`` (fractions of the half-width),
        edges smoothed over ``edge`` pixels; a 2-manifold in R^(side^2).
    """

    kind: str
    radius: float = 1.0
    minor: float = 0.4
    pitch: float = 1.0
    t_range: tuple = (-np.pi, np.pi)
    d: int = 2
    n: Optional[int] = None
    side: int = 32
    axes: tuple = (0.3, 0.9)
    edge: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unsupported manifold kind {self.kind!r}; choose from {KINDS}")
        if self.n is not None and self.n < self.base_dim:
            raise ConfigError(f"{self.kind} needs ambient dimension >= {self.base_dim}")

    @property
    def intrinsic_dim(self) -> int:
        return {"helix": 1, "circle": 1, "sphere": 2, "torus": 2,
                "plane": self.d, "ellipse-images": 2}[self.kind]

    @property
    def base_dim(self) -> int:
        return {"helix": 3, "circle": 2, "sphere": 3, "torus": 3,
                "plane": self.d + 1, "ellipse-images": self.side ** 2}[self.kind]

    @property
    def ambient_dim(self) -> int:
        return self.n if self.n is not None else self.base_dim

    # -- parametrisation -------------------------------------------------
    def param_box(self):
        return {
            "helix": [self.t_range],
            "circle": [(0.0, 2 * np.pi)],
            "sphere": [(0.0, 1.0), (0.0, 1.0)],
            "torus": [(0.0, 2 * np.pi), (0.0, 2 * np.pi)],
            "plane": [(-1.0, 1.0)] * self.d,
            "ellipse-images": [self.axes, self.axes],
        }[self.kind]

    def embed(self, params):
        """Map parameters (I, k) to points (I, n)."""
        p = np.atleast_2d(np.asarray(params, dtype=float))
        k = self.kind
        if k == "helix":
            t = p[:, 0]
            base = np.c_[self.radius * np.sin(t), self.radius * np.cos(t), self.pitch * t]
        elif k == "circle":
            t = p[:, 0]
            base = self.radius * np.c_[np.cos(t), np.sin(t)]
        elif k == "sphere":
            z = 1.0 - 2.0 * p[:, 0]
            phi = 2 * np.pi * p[:, 1]
            s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
            base = self.radius * np.c_[s * np.cos(phi), s * np.sin(phi), z]
        elif k == "torus":
            u, v = p[:, 0], p[:, 1]
            rho = self.radius + self.minor * np.cos(v)
            base = np.c_[rho * np.cos(u), rho * np.sin(u), self.minor * np.sin(v)]
        elif k == "plane":
            origin, basis = self._plane_frame()
            return origin + p @ basis.T
        else:
            return self.render(p)
        if self.ambient_dim > base.shape[1]:
            base = np.hstack([base, np.zeros((len(base), self.ambient_dim - base.shape[1]))])
        return base

    def _plane_frame(self):
        rng = np.random.default_rng(self.seed)
        n = self.ambient_dim
        basis, _ = np.linalg.qr(rng.standard_normal((n, self.d)))
        origin = 0.1 * rng.standard_normal(n)
        return origin, basis

    def render(self, axes):
        """Anti-aliased ellipse images, one flattened row per (a, b) pair."""
        axes = np.atleast_2d(axes)
        c = (np.arange(self.side) + 0.5) / self.side * 2.0 - 1.0
        xx, yy = np.meshgrid(c, c, indexing="xy")
        a = axes[:, 0][:, None, None]
        b = axes[:, 1][:, None, None]
        level = np.sqrt((xx / a) ** 2 + (yy / b) ** 2)
        width = self.edge * 2.0 / self.side / np.minimum(a, b)
        img = 0.5 * (1.0 - np.tanh((level - 1.0) / width))
        return img.reshape(len(axes), -1)

    def sample_params(self, count, jitter=0.0, rng=None):
        """Equispaced (1-d) or low-discrepancy (2-d and up) parameters."""
        k = self.kind
        box = np.array(self.param_box(), dtype=float)
        if k in ("circle", "torus"):
            closed = True
        else:
            closed = False
        if len(box) == 1:
            lo, hi = box[0]
            if closed:
                t = lo + (hi - lo) * (np.arange(count) + 0.0) / count
                step = (hi - lo) / count
            else:
                t = np.linspace(lo, hi, count)
                step = (hi - lo) / max(count - 1, 1)
            if jitter:
                rng = rng or np.random.default_rng(self.seed)
                t = t + jitter * step * rng.uniform(-0.5, 0.5, count)
                if not closed:
                    t = np.clip(t, lo, hi)
            return t[:, None]
        if k == "ellipse-images":
            side = int(round(np.sqrt(count)))
            if side * side == count:
                g = np.linspace(box[0, 0], box[0, 1], side)
                ga, gb = np.meshgrid(g, g, indexing="ij")
                return np.c_[ga.ravel(), gb.ravel()]
        if k == "sphere":
            golden = (1 + 5 ** 0.5) / 2
            i = np.arange(count)
            return np.c_[(i + 0.5) / count, (i / golden) % 1.0]
        if k == "torus":
            golden = (1 + 5 ** 0.5) / 2
            i = np.arange(count)
            return 2 * np.pi * np.c_[i / count, (i / golden) % 1.0]
        u = qmc.Halton(len(box), scramble=True, seed=self.seed).random(count)
        return box[:, 0] + u * (box[:, 1] - box[:, 0])

    # -- distance --------------------------------------------------------
    @property
    def oracle_gap(self) -> float:
        """Sampling gap of the dense oracle (0 for closed forms)."""
        if self.kind == "helix":
            return self._helix_oracle()[2]
        if self.kind == "ellipse-images":
            return self._ellipse_oracle()[2]
        return 0.0

    def _helix_oracle(self):
        cache = self.__dict__.get("_helix_cache")
        if cache is None:
            lo, hi = self.t_range
            t = np.linspace(lo, hi, 20001)
            pts = self.embed(t[:, None])
            gap = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
            cache = (t, cKDTree(pts), gap)
            object.__setattr__(self, "_helix_cache", cache)
        return cache

    def _ellipse_oracle(self):
        cache = self.__dict__.get("_ellipse_cache")
        if cache is None:
            g = np.linspace(self.axes[0], self.axes[1], 61)
            ga, gb = np.meshgrid(g, g, indexing="ij")
            params = np.c_[ga.ravel(), gb.ravel()]
            imgs = self.render(params)
            tree = cKDTree(imgs)
            gap = float(max(np.linalg.norm(self.render(params[:-1]) - self.render(params[1:]),
                                           axis=1).max(), 0.0))
            cache = (params, tree, gap)
            object.__setattr__(self, "_ellipse_cache", cache)
        return cache

    def distances(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.kind
        if k == "circle":
            rest = np.sum(x[:, 2:] ** 2, axis=1)
            return np.sqrt((np.hypot(x[:, 0], x[:, 1]) - self.radius) ** 2 + rest)
        if k == "sphere":
            rest = np.sum(x[:, 3:] ** 2, axis=1)
            return np.sqrt((np.linalg.norm(x[:, :3], axis=1) - self.radius) ** 2 + rest)
        if k == "torus":
            ring = np.hypot(np.hypot(x[:, 0], x[:, 1]) - self.radius, x[:, 2])
            rest = np.sum(x[:, 3:] ** 2, axis=1)
            return np.sqrt((ring - self.minor) ** 2 + rest)
        if k == "plane":
            origin, basis = self._plane_frame()
            diff = x - origin
            return np.linalg.norm(diff - (diff @ basis) @ basis.T, axis=1)
        if k == "helix":
            return np.array([self._helix_distance(p) for p in x])
        return np.array([self._ellipse_distance(p) for p in x])

    def _helix_distance(self, p):
        t, tree, _ = self._helix_oracle()
        d0, i = tree.query(p)
        lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
        f = lambda s: float(np.sum((self.embed([[s]])[0] - p) ** 2))
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        return float(min(np.sqrt(max(res.fun, 0.0)), d0))

    def _ellipse_distance(self, p):
        params, tree, _ = self._ellipse_oracle()
        d0, i = tree.query(p)
        f = lambda ab: float(np.sum((self.render(ab[None, :])[0] - p) ** 2))
        res = minimize(f, params[i], method="L-BFGS-B", bounds=[self.axes, self.axes])
        return float(min(np.sqrt(max(res.fun, 0.0)), d0))


def distance_to_manifold(point, spec: SyntheticManifold) -> float:
    return float(spec.distances(np.asarray(point, dtype=float)[None, :])[0])


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive noise: U(-amplitude, amplitude) or N(0, amplitude^2) per coordinate."""

    kind: str = "uniform-box"
    amplitude: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform-box", "gaussian-iid"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ConfigError("noise amplitude must be nonnegative")

    def sample(self, shape, rng=None):
        rng = rng or np.random.default_rng(self.seed)
        if self.kind == "uniform-box":
            return rng.uniform(-self.amplitude, self.amplitude, shape)
        return rng.normal(0.0, self.amplitude, shape)


def sample_manifold(spec: SyntheticManifold, count: int, noise: Optional[NoiseModel] = None,
                    seed: int = 0, jitter: float = 0.0) -> PointCloud:
    if count < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    params = spec.sample_params(count, jitter=jitter, rng=rng)
    clean = spec.embed(params)
    noisy = clean if noise is None else clean + noise.sample(clean.shape, rng)
    return PointCloud(noisy, truth=clean, params=params)


def fill_distance(samples, probes) -> float:
    """sup over the probe set of the distance to the nearest sample."""
    dist, _ = cKDTree(np.asarray(samples, dtype=float)).query(np.asarray(probes, dtype=float))
    return float(np.max(dist))


def one_sided_hausdorff(a, b) -> float:
    """max over a of the distance to the nearest point of b."""
    dist, _ = cKDTree(np.asarray(b, dtype=float)).query(np.asarray(a, dtype=float))
    return float(np.max(dist))


def hausdorff(a, b):
    """(a->b, b->a, symmetric) Hausdorff distances between finite point sets."""
    ab = one_sided_hausdorff(a, b)
    ba = one_sided_hausdorff(b, a)
    return ab, ba, max(ab, ba)


def loglog_slope(h, err) -> float:
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class ErrorReport:
    """Error figures of an experiment.

    ``hausdorff_forward`` is max over approximant points of the distance to the
    reference; ``hausdorff_backward`` the reverse direction.
    """

    rmse_to_truth: float = float("nan")
    hausdorff_forward: float = float("nan")
    hausdorff_backward: float = float("nan")
    per_point: np.ndarray = field(default_factory=lambda: np.zeros(0))
    per_point_before: Optional[np.ndarray] = None
    rmse_before: Optional[float] = None
    manifold_rmse_before: Optional[float] = None
    manifold_rmse_after: Optional[float] = None
    mean_truth_before: Optional[float] = None
    mean_truth_after: Optional[float] = None
    levels: List[dict] = field(default_factory=list)
    slope: Optional[float] = None
    failures: int = 0
    flagged: int = 0

    @property
    def hausdorff(self) -> float:
        return max(self.hausdorff_forward, self.hausdorff_backward)


def _project_all(cloud, queries, config, workers=1):
    results = project_cloud(cloud, queries, config, workers=workers)
    projected = np.array([r.projected for r in results])
    failed = np.array([not r.ok for r in results], dtype=bool)
    flagged = sum(bool(r.flags) for r in results)
    return results, projected, failed, flagged


def run_convergence_study(spec: SyntheticManifold, m: int, counts: Sequence[int],
                          config: Optional[MmlsConfig] = None, probes: int = 200,
                          seed: int = 0, jitter: float = 0.0, workers: int = 1) -> ErrorReport:
    """Project on-manifold probes with clean clouds of growing density.

    ``counts`` are sample sizes (doubling counts halve h for curves). Each
    level records the measured fill distance h, the max and RMS probe error,
    and the forward/backward Hausdorff bounds; the slope is fitted to
    log(max error) against log(h).
    """
    if len(counts) < 3:
        raise ConfigError("a convergence study needs at least 3 levels")
    config = config or MmlsConfig(d=spec.intrinsic_dim, m=m)
    config = replace(config, d=spec.intrinsic_dim, m=m, sigma=config.sigma if config.sigma else None)
    rng = np.random.default_rng(seed + 7919)
    box = np.array(spec.param_box())
    probe_params = box[:, 0] + rng.uniform(size=(probes, len(box))) * (box[:, 1] - box[:, 0])
    probe_pts = spec.embed(probe_params)
    dense_count = 16 * max(counts)
    dense = spec.embed(spec.sample_params(dense_count)) if spec.intrinsic_dim == 1 else \
        spec.embed(spec.sample_params(4 * max(counts)))

    report = ErrorReport()
    scale = max(1.0, float(np.max(np.linalg.norm(dense - dense.mean(axis=0), axis=1))))
    for count in counts:
        cloud = sample_manifold(spec, count, seed=seed, jitter=jitter)
        h = fill_distance(cloud.points, dense)
        _, projected, failed, flagged = _project_all(cloud, probe_pts, config, workers)
        ok = ~failed
        dist = spec.distances(projected[ok]) if ok.any() else np.array([np.nan])
        backward = float(np.max(np.linalg.norm(projected[ok] - probe_pts[ok], axis=1))) \
            if ok.any() else float("nan")
        report.levels.append({
            "points": count, "h": h, "max_error": float(np.max(dist)),
            "rmse": float(np.sqrt(np.mean(dist ** 2))), "backward": backward,
            "failures": int(failed.sum()), "flagged": int(flagged)})
        report.failures += int(failed.sum())
        report.flagged += int(flagged)
    hs = np.array([lv["h"] for lv in report.levels])
    errs = np.array([lv["max_error"] for lv in report.levels])
    last = report.levels[-1]
    report.hausdorff_forward = last["max_error"]
    report.hausdorff_backward = last["backward"]
    report.rmse_to_truth = last["rmse"]
    if np.all(errs < 1e-10 * scale):
        report.slope = None
    else:
        report.slope = loglog_slope(hs, np.maximum(errs, np.finfo(float).tiny))
    return report


def run_denoise_experiment(spec: SyntheticManifold, count: int, noise: NoiseModel,
                           config: Optional[MmlsConfig] = None, seed: int = 0,
                           workers: int = 1, manifold_distance: bool = True) -> ErrorReport:
    """Perturb clean samples, project every noisy point onto the approximant.

    Reports RMS and mean distances to the retained clean twins before/after,
    and (optionally) RMS distances to the manifold itself.
    """
    config = config or MmlsConfig(d=spec.intrinsic_dim)
    cloud = sample_manifold(spec, count, noise=noise, seed=seed)
    _, projected, failed, flagged = _project_all(cloud, cloud.points, config, workers)
    ok = ~failed
    before = np.linalg.norm(cloud.points - cloud.truth, axis=1)
    after = np.linalg.norm(projected - cloud.truth, axis=1)
    report = ErrorReport(per_point=after, per_point_before=before,
                         failures=int(failed.sum()), flagged=int(flagged))
    report.rmse_before = float(np.sqrt(np.mean(before ** 2)))
    report.rmse_to_truth = float(np.sqrt(np.mean(after[ok] ** 2)))
    report.mean_truth_before = float(before.mean())
    report.mean_truth_after = float(after[ok].mean())
    if manifold_distance:
        d_before = spec.distances(cloud.points)
        d_after = spec.distances(projected[ok])
        report.manifold_rmse_before = float(np.sqrt(np.mean(d_before ** 2)))
        report.manifold_rmse_after = float(np.sqrt(np.mean(d_after ** 2)))
        report.hausdorff_forward = float(d_after.max())
    report.hausdorff_backward = one_sided_hausdorff(cloud.truth, projected[ok])
    return report


def reduced_distance_metric(points, d, factor=50, seed=0) -> MetricForm:
    """Distance form restricted to the top ``factor * d`` principal directions.

    Localises very noisy high-dimensional data: the weights are computed from
    distances in this subspace while the fit still uses full vectors.
    """
    x = np.asarray(points, dtype=float)
    k = min(factor * d, min(x.shape))
    centered = (x - x.mean(axis=0)).T
    basis, _ = top_left_singular(centered, k, method="randomized" if k < min(x.shape) - 8
                                 else "full", seed=seed)
    return MetricForm.reduced(basis)


def random_rotation(n, seed=0):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def measure_linear_scaling(d: int, m: int, n_levels: Sequence[int],
                           config: Optional[MmlsConfig] = None, count: int = 1000,
                           queries: int = 40, repeats: int = 3, seed: int = 0,
                           noise: float = 0.01):
    """Time per-point projection of a fixed d-manifold embedded in growing R^n.

    The base manifold (circle for d = 1, sphere for d = 2) is sampled once,
    zero-padded to each n and rotated by a seeded random orthogonal matrix.
    Returns rows with seconds per point, the ratio to the previous level and
    the equivariance error max |Q^T P_n(Q x) - P(x)| against the base run.
    """
    if d == 1:
        spec = SyntheticManifold("circle")
    elif d == 2:
        spec = SyntheticManifold("sphere")
    else:
        spec = SyntheticManifold("plane", d=d)
    config = config or MmlsConfig(d=d, m=m)
    config = replace(config, d=d, m=m)
    base = sample_manifold(spec, count, noise=NoiseModel("gaussian-iid", noise, seed) if noise else None,
                           seed=seed)
    base_cfg = config.resolve(base)
    q_idx = np.linspace(0, count - 1, min(queries, count)).astype(int)
    base_queries = base.points[q_idx]
    base_out = np.array([project_point(base, r, base_cfg).projected for r in base_queries])
    n0 = base.dim

    rows = []
    prev = None
    for n in n_levels:
        if n < n0:
            raise ConfigError(f"ambient dimension {n} below base dimension {n0}")
        rot = random_rotation(n, seed=seed + n)
        pad = lambda x: np.hstack([x, np.zeros((len(x), n - n0))])
        cloud = PointCloud(pad(base.points) @ rot.T)
        qs = pad(base_queries) @ rot.T
        cloud.diameter
        cfg = replace(base_cfg, metric=MetricForm()) if base_cfg.metric.is_euclidean else base_cfg
        timings = []
        out = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = np.array([project_point(cloud, r, cfg).projected for r in qs])
            timings.append((time.perf_counter() - t0) / len(qs))
        per_point = float(np.min(timings))
        back = out @ rot
        err = float(max(np.max(np.abs(back[:, :n0] - base_out)), np.max(np.abs(back[:, n0:]), initial=0.0)))
        rows.append({"n": n, "seconds_per_point": per_point,
                     "ratio": per_point / prev if prev else float("nan"),
                     "equivariance_error": err})
        prev = per_point
    return rows
