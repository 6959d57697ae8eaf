"""Geometrically weighted PCA and the iterative least-squares / subspace iteration pair.

Bases are returned as ``(n, d)`` arrays with orthonormal columns. Each column
is sign-normalised so its largest-magnitude entry is positive.
"""

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateDataError

RANK_TOL = 1e-12
FULL_SVD_MAX_DIM = 512
RSVD_OVERSAMPLE = 8
RSVD_POWER_ITERS = 2


def canonical_signs(basis):
    basis = np.array(basis, dtype=float, copy=True)
    if basis.ndim == 1:
        basis = basis[:, None]
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def orthonormalize(vectors):
    q, _ = np.linalg.qr(np.asarray(vectors, dtype=float))
    return q


def principal_angles(a, b):
    """Principal angles (radians, descending) between the column spans of a and b."""
    return sla.subspace_angles(np.atleast_2d(np.asarray(a, dtype=float).T).T,
                               np.atleast_2d(np.asarray(b, dtype=float).T).T)


def max_principal_angle(a, b) -> float:
    return float(np.max(principal_angles(a, b)))


def weighted_matrix(points, q, weights):
    """Columns sqrt(w_i) (x_i - q), shape (n, I)."""
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return ((points - np.asarray(q, dtype=float)) * np.sqrt(weights)[:, None]).T


def randomized_left_singular(a, d, oversample=RSVD_OVERSAMPLE, power_iters=RSVD_POWER_ITERS,
                             seed=0):
    """Top-d left singular vectors and values of ``a`` by a randomized range finder."""
    n, cols = a.shape
    k = min(d + oversample, n, cols)
    rng = np.random.default_rng(seed)
    y = a @ rng.standard_normal((cols, k))
    q, _ = np.linalg.qr(y)
    for _ in range(power_iters):
        q, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ q)
    u_small, s, _ = np.linalg.svd(q.T @ a, full_matrices=False)
    return q @ u_small[:, :d], s


def top_left_singular(a, d, method="auto", seed=0):
    """Top-d left singular subspace of ``a`` plus the singular values found."""
    n, cols = a.shape
    if method == "auto":
        method = "full" if n <= FULL_SVD_MAX_DIM or min(n, cols) <= d + RSVD_OVERSAMPLE else "randomized"
    if method == "randomized":
        return randomized_left_singular(a, d, seed=seed)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, :d], s


def weighted_pca(points, q, weights, d, method="auto"):
    """Top-d principal directions of the points about q, weighted by sqrt(w).

    The returned basis spans the rank-d orthogonal projection P minimising
    ``sum_i w_i |P (x_i - q) - (x_i - q)|^2``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = weighted_matrix(points, q, weights)
    if d > min(a.shape):
        raise DegenerateDataError(
            f"rank {d} requested from {a.shape[1]} points in R^{a.shape[0]}",
            rank=min(a.shape), required=d)
    u, s = top_left_singular(a, d, method=method)
    rank = _numerical_rank(s)
    if rank < d:
        raise DegenerateDataError(
            f"weighted data has rank {rank}, need {d}", rank=rank, required=d)
    return canonical_signs(u)


def _numerical_rank(s):
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def _check_matrix(r):
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if not np.any(r):
        raise DegenerateDataError("zero data matrix", rank=0)
    return r


def subspace_iteration(r, u0, iterations):
    """``U <- Q(qr(R R^T U))`` applied ``iterations`` times; r is (n, I)."""
    r = _check_matrix(r)
    if iterations == 0:
        return np.array(u0, dtype=float)
    u = orthonormalize(u0)
    for _ in range(iterations):
        u = orthonormalize(r @ (r.T @ u))
    return canonical_signs(u)


def iterative_ls_subspace(points, u0, iterations, rcond=1e-12):
    """Alternate a least-squares fit of A in min |R - A U^T R|_F with a QR of A.

    points are (I, n) rows; R is their transpose. Each step solves for the
    n x d matrix A explicitly and orthonormalises its columns.
    """
    r = _check_matrix(np.asarray(points, dtype=float)).T
    if iterations == 0:
        return np.array(u0, dtype=float)
    u = orthonormalize(u0)
    for _ in range(iterations):
        x = u.T @ r
        gram = x @ x.T
        sv = np.linalg.svd(gram, compute_uv=False)
        if sv[-1] <= rcond * sv[0] or sv[0] == 0:
            raise DegenerateDataError(
                "singular Gram matrix U^T R R^T U", rank=_numerical_rank(sv), required=len(sv))
        # A X = R in the least-squares sense  <=>  X^T A^T = R^T
        a_t, *_ = np.linalg.lstsq(x.T, r.T, rcond=None)
        u = orthonormalize(a_t.T)
    return canonical_signs(u)
