from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class PointCloud:
    """I sample points in R^n, one per row, with an optional noise-free twin.

    ``truth`` is the ground-truth sample each noisy row was generated from; it
    is only set by the synthetic generators.
    """

    points: np.ndarray
    truth: Optional[np.ndarray] = None
    params: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise DomainError("points must be a 2-D array (I, n)")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.truth is not None:
            truth = np.array(self.truth, dtype=float, copy=True).reshape(pts.shape)
            truth.setflags(write=False)
            object.__setattr__(self, "truth", truth)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.size

    @cached_property
    def diameter(self) -> float:
        """Largest pairwise Euclidean distance."""
        return max_pairwise_distance(self.points)


def max_pairwise_distance(points, chunk=1024):
    x = np.asarray(points, dtype=float)
    if len(x) < 2:
        return 0.0
    x = x - x.mean(axis=0)
    sq = np.einsum("ij,ij->i", x, x)
    best = 0.0
    for start in range(0, len(x), chunk):
        block = x[start:start + chunk]
        d2 = sq[start:start + chunk, None] + sq[None, :] - 2.0 * block @ x.T
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))
