"""The local affine coordinate system (q, H) around a query point."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .cloud import PointCloud
from .errors import DegenerateDataError, DegenerateNeighborhoodError, NoSupportError
from .lsq import weighted_lstsq
from .weights import EUCLIDEAN, MetricForm, WeightFunction
from .wpca import canonical_signs, orthonormalize, weighted_pca

WEIGHT_CUTOFF = 1e-14
EPS_FACTOR = 1e-10
DEFAULT_MAX_ITERS = 10
COST_SLACK = 1e-12


@dataclass
class AffineFrame:
    """Origin q and an orthonormal (n, d) basis of H - q."""

    origin: np.ndarray
    basis: np.ndarray
    constraint_residual: float = 0.0

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def coords(self, points):
        return (np.asarray(points, dtype=float) - self.origin) @ self.basis

    def residual_for(self, r) -> float:
        """max_k |<r - q, e_k>|."""
        return float(np.max(np.abs((np.asarray(r, dtype=float) - self.origin) @ self.basis)))


@dataclass
class FrameSolveReport:
    iterations_used: int = 0
    cost_history: List[float] = field(default_factory=list)
    converged: bool = False
    final_step: float = float("nan")
    cost_increased: bool = False


def as_cloud(cloud):
    return cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)


def local_weights(points, center, theta, metric=EUCLIDEAN, cutoff=WEIGHT_CUTOFF):
    """Indices and weights of points whose weight exceeds cutoff * max weight."""
    w = theta(metric.distances(points, center))
    wmax = w.max() if len(w) else 0.0
    if not wmax > 0:
        raise NoSupportError("no sample has nonzero weight at this location; "
                             "query lies outside the data support")
    idx = np.flatnonzero(w > cutoff * wmax)
    return idx, w[idx]


def cost_J(cloud, theta: WeightFunction, metric: MetricForm, frame: AffineFrame) -> float:
    """sum_i d(r_i, H)^2 theta(dist(r_i, q))."""
    points = as_cloud(cloud).points
    diff = points - frame.origin
    along = diff @ frame.basis
    d2 = np.einsum("ij,ij->i", diff, diff) - np.einsum("ij,ij->i", along, along)
    w = theta(metric.distances(points, frame.origin))
    return float(np.sum(np.maximum(d2, 0.0) * w))


def _initial_basis(points, r, d, theta, metric):
    idx, w = local_weights(points, r, theta, metric)
    try:
        return weighted_pca(points[idx], r, w, d)
    except DegenerateDataError as exc:
        raise DegenerateNeighborhoodError(
            f"weighted PCA around the query is rank deficient: {exc}",
            rank=exc.rank, required=d) from exc


def _affine_step(points, r, q, u, theta, metric):
    """Weighted linear fit over the current frame; returns (q_next, u_next)."""
    idx, w = local_weights(points, q, theta, metric)
    diff = points[idx] - q
    x = diff @ u
    scale = np.sqrt(np.sum(w * np.einsum("ij,ij->i", x, x)) / np.sum(w))
    if not scale > 0:
        scale = 1.0
    design = np.hstack([np.ones((len(idx), 1)), x / scale])
    coef = weighted_lstsq(design, diff, w)
    q_tmp = q + coef[0]
    u_next = orthonormalize(coef[1:].T)
    q_next = q_tmp + u_next @ (u_next.T @ (r - q_tmp))
    return q_next, u_next


def find_local_frame(cloud, r, d, theta, metric=EUCLIDEAN, eps=None,
                     max_iters=DEFAULT_MAX_ITERS, fixed_iterations=None,
                     init_origin=None, init_basis=None):
    """Iteratively solve for (q(r), H(r)).

    Starts from q = r and a weighted PCA around r (or from a given frame),
    then repeats: weighted affine fit of the samples over the current frame,
    re-orthonormalise the fitted directions, move q to the orthogonal
    projection of r on the new plane. Stops once q moves by less than ``eps``
    (default 1e-10 x cloud diameter) or after ``max_iters``; with
    ``fixed_iterations`` exactly that many steps are run.

    Returns ``(AffineFrame, FrameSolveReport)``.
    """
    cloud = as_cloud(cloud)
    points = cloud.points
    r = np.asarray(r, dtype=float).reshape(-1)
    metric.check_dim(points.shape[1])
    if eps is None:
        eps = EPS_FACTOR * max(cloud.diameter, np.finfo(float).tiny)

    q = r.copy() if init_origin is None else np.asarray(init_origin, dtype=float).copy()
    if init_basis is None:
        u = _initial_basis(points, r, d, theta, metric)
    else:
        u = orthonormalize(init_basis)

    report = FrameSolveReport()
    report.cost_history.append(cost_J(cloud, theta, metric, AffineFrame(q, u)))
    limit = fixed_iterations if fixed_iterations is not None else max_iters
    for _ in range(limit):
        q_next, u = _affine_step(points, r, q, u, theta, metric)
        step = float(np.linalg.norm(q_next - q))
        q = q_next
        report.iterations_used += 1
        report.final_step = step
        report.cost_history.append(cost_J(cloud, theta, metric, AffineFrame(q, u)))
        if fixed_iterations is None and step < eps:
            report.converged = True
            break
    if fixed_iterations is not None:
        report.converged = True

    costs = np.asarray(report.cost_history)
    slack = COST_SLACK * max(costs.max(), np.finfo(float).tiny)
    report.cost_increased = bool(np.any(np.diff(costs) > slack))
    frame = AffineFrame(q, canonical_signs(u))
    frame.constraint_residual = frame.residual_for(r)
    return frame, report


def frame_given_q(cloud, r, q, d, theta, metric=EUCLIDEAN):
    """Optimal H through a fixed origin q subject to r - q perpendicular to H.

    The samples' offsets from q are projected onto the orthogonal complement
    of r - q and a weighted PCA of those projections (weights
    theta(dist(r_i, q))) gives H.
    """
    cloud = as_cloud(cloud)
    points = cloud.points
    r = np.asarray(r, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    idx, w = local_weights(points, q, theta, metric)
    diff = points[idx] - q
    normal = r - q
    nrm = np.linalg.norm(normal)
    if nrm > 1e-14 * max(np.linalg.norm(diff, axis=1).max(), np.finfo(float).tiny):
        normal = normal / nrm
        diff = diff - np.outer(diff @ normal, normal)
    basis = weighted_pca(diff, np.zeros_like(q), w, d)
    frame = AffineFrame(q.copy(), basis)
    frame.constraint_residual = frame.residual_for(r)
    return frame
