"""Manifold moving least-squares (MMLS) projection of noisy point clouds."""

from .cloud import PointCloud
from .errors import (ConfigError, DegenerateDataError, DegenerateNeighborhoodError, DomainError,
                     InsufficientDataError, MmlsError, NoSupportError, ParseError)
from .frame import AffineFrame, FrameSolveReport, cost_J, find_local_frame, frame_given_q
from .project import (MmlsConfig, PolynomialMap, ProjectionResult, mls_function_approx,
                      project_cloud, project_point, weighted_poly_fit)
from .weights import MetricForm, WeightFunction, estimate_sigma, eval_weight
from .wpca import iterative_ls_subspace, principal_angles, subspace_iteration, weighted_pca

__all__ = [
    "AffineFrame", "ConfigError", "DegenerateDataError", "DegenerateNeighborhoodError",
    "DomainError", "FrameSolveReport", "InsufficientDataError", "MetricForm", "MmlsConfig",
    "MmlsError", "NoSupportError", "ParseError", "PointCloud", "PolynomialMap",
    "ProjectionResult", "WeightFunction", "cost_J", "estimate_sigma", "eval_weight",
    "find_local_frame", "frame_given_q", "iterative_ls_subspace", "mls_function_approx",
    "principal_angles", "project_cloud", "project_point", "subspace_iteration",
    "weighted_pca", "weighted_poly_fit",
]
