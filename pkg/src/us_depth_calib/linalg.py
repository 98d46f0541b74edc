"""Dense linear algebra used by the calibration model.

All functions take matrices by value: inputs are never mutated and results are
fresh float64 arrays, so they are safe to call from several threads at once.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatchError, NonFiniteError, SvdConvergenceError

logger = logging.getLogger(__name__)

Mat = NDArray[np.float64]

DEFAULT_RANK_TOL = 1e-10


def as_matrix(a: ArrayLike, name: str = "matrix") -> Mat:
    """Copy ``a`` into a finite 2-D float64 array."""
    array = np.array(a, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got {array.ndim}-D")
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return array


def matmul(a: ArrayLike, b: ArrayLike) -> Mat:
    """Matrix product ``a @ b``."""
    left = as_matrix(a, "left operand")
    right = as_matrix(b, "right operand")
    if left.shape[1] != right.shape[0]:
        raise DimensionMismatchError(
            f"cannot multiply {left.shape[0]}x{left.shape[1]} by {right.shape[0]}x{right.shape[1]}"
        )
    product = left @ right
    if not np.all(np.isfinite(product)):
        raise NonFiniteError("matrix product overflowed")
    return product


def _svd(a: Mat) -> tuple[Mat, Mat, Mat]:
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        return u, s, vt
    except np.linalg.LinAlgError as e:
        raise SvdConvergenceError(f"SVD of {a.shape[0]}x{a.shape[1]} matrix did not converge") from e


def _cutoff(singular: Mat, rank_tol: float) -> float:
    if rank_tol <= 0:
        raise ValueError(f"rank_tol must be positive, got {rank_tol}")
    largest = float(singular[0]) if singular.size else 0.0
    return rank_tol * largest


def generalized_inverse(a: ArrayLike, rank_tol: float = DEFAULT_RANK_TOL) -> Mat:
    """Moore-Penrose pseudo-inverse through the singular value decomposition.

    Singular values below ``rank_tol`` times the largest one are treated as zero,
    so a nearly rank-deficient input degrades to the pseudo-inverse of its
    well-conditioned part instead of blowing up.

    Args:
        a: Nonempty M x N matrix
        rank_tol: Relative singular value cutoff

    Returns:
        N x M pseudo-inverse

    Raises:
        SvdConvergenceError: If the SVD fails
    """
    array = as_matrix(a)
    if array.size == 0:
        raise DimensionMismatchError("cannot invert an empty matrix")
    u, s, vt = _svd(array)
    cutoff = _cutoff(s, rank_tol)
    keep = s > cutoff
    inverse_s = np.zeros_like(s)
    inverse_s[keep] = 1.0 / s[keep]
    dropped = int(s.size - np.count_nonzero(keep))
    if dropped:
        logger.debug("generalized_inverse: dropped %d of %d singular values below %.3e", dropped, s.size, cutoff)
    return (vt.T * inverse_s) @ u.T


def rank_and_condition(a: ArrayLike, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[int, float]:
    """Numerical rank and the condition number of the retained singular values.

    A zero matrix has rank 0; its condition is reported as infinity.
    """
    array = as_matrix(a)
    if array.size == 0:
        raise DimensionMismatchError("cannot rank an empty matrix")
    _, s, _ = _svd(array)
    cutoff = _cutoff(s, rank_tol)
    retained = s[s > cutoff]
    if retained.size == 0:
        return 0, float("inf")
    return int(retained.size), float(retained[0] / retained[-1])


def rigid_inverse(rotation: ArrayLike, translation: ArrayLike) -> Mat:
    """Closed-form inverse of the rigid transform (R, t): [R^T, -R^T t; 0 0 0 1]."""
    rotation = as_matrix(rotation, "rotation")
    translation = np.asarray(translation, dtype=np.float64).reshape(-1)
    if rotation.shape != (3, 3) or translation.shape != (3,):
        raise DimensionMismatchError(
            f"rigid transform needs a 3x3 rotation and a 3-vector, got {rotation.shape} and {translation.shape}"
        )
    inverse = np.eye(4)
    inverse[:3, :3] = rotation.T
    inverse[:3, 3] = -rotation.T @ translation
    return inverse
