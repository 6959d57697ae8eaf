import numpy as np
import scipy.linalg as sla

from .errors import DegenerateNeighborhoodError

RANK_TOL = 1e-10


def weighted_lstsq(design, rhs, weights, rank_tol=RANK_TOL):
    """Minimise sum_i w_i |design_i c - rhs_i|^2 for every column of rhs at once.

    One pivoted QR of the sqrt(w)-scaled design serves all right-hand sides.
    Returns the coefficient matrix, shape (design.shape[1],) + rhs.shape[1:].
    """
    design = np.asarray(design, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    sw = np.sqrt(np.asarray(weights, dtype=float))
    cols = design.shape[1]
    if design.shape[0] < cols:
        raise DegenerateNeighborhoodError(
            f"{design.shape[0]} weighted points for {cols} unknowns",
            rank=design.shape[0], required=cols)
    a = design * sw[:, None]
    b = rhs * (sw[:, None] if rhs.ndim == 2 else sw)
    q, r, piv = sla.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rank_tol * diag[0])) if diag[0] > 0 else 0
    if rank < cols:
        raise DegenerateNeighborhoodError(
            f"least-squares design has rank {rank}, need {cols}", rank=rank, required=cols)
    sol = sla.solve_triangular(r, q.T @ b)
    coef = np.empty_like(sol)
    coef[piv] = sol
    return coef
