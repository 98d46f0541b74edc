"""Calibration model linking the US image, the US probe and the depth camera.

A homogeneous pixel ``p`` maps to the camera frame as ``extrinsic @ intrinsic @ p``.
With the pixels of n correspondences stacked as columns of ``pixels`` (3 x n) and
the camera-frame points as columns of ``world`` (4 x n), the intrinsic matrix is

    intrinsic = inverse(extrinsic) @ world @ pinv(pixels)

which is the Frobenius least-squares solution when n > 3.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike

from .errors import DimensionMismatchError, HomogeneousComponentError, RankDeficientError
from .linalg import DEFAULT_RANK_TOL, Mat, generalized_inverse, matmul, rank_and_condition, rigid_inverse
from .models import (
    Calibration,
    CalibrationDiagnostics,
    ExtrinsicTransform,
    ImagePoint,
    IntrinsicMatrix,
    PointPairSet,
    StructureReport,
    WorldPoint,
)

logger = logging.getLogger(__name__)

REQUIRED_RANK = 3
DEFAULT_STRUCTURE_TOL_MM = 0.1
DEFAULT_HOMOGENEOUS_TOL = 1e-6


def build_point_matrices(pairs: PointPairSet) -> tuple[Mat, Mat]:
    """Stack the correspondences column-wise.

    Returns:
        (world, 4 x n homogeneous camera-frame points; pixels, 3 x n homogeneous pixels)
    """
    if pairs.n == 0:
        raise DimensionMismatchError("no point pairs to stack")
    n = pairs.n
    world = np.ones((4, n))
    world[:3, :] = pairs.world_array().T
    pixels = np.ones((3, n))
    pixels[:2, :] = pairs.pixel_array().T
    return world, pixels


def fit_residual(pairs: PointPairSet, extrinsic: ExtrinsicTransform, intrinsic: ArrayLike) -> float:
    """Frobenius norm of inverse(extrinsic) @ world - X @ pixels for a candidate intrinsic X, mm."""
    world, pixels = build_point_matrices(pairs)
    target = rigid_inverse(extrinsic.rotation, extrinsic.translation) @ world
    return float(np.linalg.norm(target - matmul(intrinsic, pixels)))


def enforce_planar_structure(intrinsic: IntrinsicMatrix) -> IntrinsicMatrix:
    """Zero row 3 and set row 4 to [0, 0, 1]."""
    array = np.array(intrinsic.array)
    array[2, :] = 0.0
    array[3, :] = (0.0, 0.0, 1.0)
    return IntrinsicMatrix.from_array(array)


def solve_intrinsic(
    pairs: PointPairSet,
    extrinsic: ExtrinsicTransform,
    rank_tol: float = DEFAULT_RANK_TOL,
    enforce_planar: bool = False,
) -> Calibration:
    """Solve the intrinsic matrix from correspondences and a known extrinsic transform.

    Args:
        pairs: At least three correspondences with non-collinear pixels
        extrinsic: Probe-to-camera rigid transform
        rank_tol: Relative singular value cutoff for the pixel matrix
        enforce_planar: Overwrite rows 3 and 4 with the coplanar structure after solving

    Returns:
        Calibration with diagnostics (rank, condition, residual)

    Raises:
        RankDeficientError: If fewer than three pairs are given or the pixels are collinear
    """
    if pairs.n < REQUIRED_RANK:
        raise RankDeficientError(rank=pairs.n)
    world, pixels = build_point_matrices(pairs)
    rank, condition = rank_and_condition(pixels, rank_tol)
    if rank < REQUIRED_RANK:
        raise RankDeficientError(rank=rank)

    target = matmul(rigid_inverse(extrinsic.rotation, extrinsic.translation), world)
    solved = matmul(target, generalized_inverse(pixels, rank_tol))
    intrinsic = IntrinsicMatrix.from_array(solved)
    if enforce_planar:
        intrinsic = enforce_planar_structure(intrinsic)

    residual = float(np.linalg.norm(target - intrinsic.array @ pixels))
    logger.info(
        "Solved intrinsic from %d pairs: rank=%d condition=%.3e residual=%.6f mm%s",
        pairs.n,
        rank,
        condition,
        residual,
        " (planar structure enforced)" if enforce_planar else "",
    )
    diagnostics = CalibrationDiagnostics(rank=rank, condition=condition, residual_frobenius=residual)
    return Calibration.compose(extrinsic, intrinsic, diagnostics)


def map_image_to_world(
    calibration: Calibration,
    point: ImagePoint,
    homogeneous_tol: float = DEFAULT_HOMOGENEOUS_TOL,
) -> WorldPoint:
    """Map a US pixel into the depth-camera frame.

    Raises:
        HomogeneousComponentError: If the mapped homogeneous coordinate is not 1
    """
    probe = calibration.intrinsic.array @ point.homogeneous()
    world = calibration.extrinsic.array @ probe
    if abs(world[3] - 1.0) > homogeneous_tol:
        raise HomogeneousComponentError(
            f"mapped pixel ({point.u}, {point.v}) has homogeneous component {world[3]:.9g}, expected 1"
        )
    return WorldPoint(x=float(world[0]), y=float(world[1]), z=float(world[2]))


def validate_intrinsic_structure(
    intrinsic: IntrinsicMatrix, tol_mm: float = DEFAULT_STRUCTURE_TOL_MM
) -> StructureReport:
    """Measure how far rows 3 and 4 are from [0, 0, 0] and [0, 0, 1]."""
    array = intrinsic.array
    report = StructureReport(
        row3_max_abs=float(np.max(np.abs(array[2, :]))),
        row4_max_deviation=float(np.max(np.abs(array[3, :] - np.array([0.0, 0.0, 1.0])))),
        tol_mm=tol_mm,
    )
    if not report.compliant:
        logger.warning(
            "Intrinsic structure violated: row 3 max %.6f, row 4 deviation %.6f (tol %.3g)",
            report.row3_max_abs,
            report.row4_max_deviation,
            tol_mm,
        )
    return report
