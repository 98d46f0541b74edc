"""Needle tip localization in segmentation masks and depth-camera back-projection."""

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateCloudError, NonPositiveDepthError, TooFewPixelsError, ZeroDirectionError
from .models import BinaryMask, ImagePoint, LineFitMethod, LineSegment2D, PinholeIntrinsics, WorldPoint

logger = logging.getLogger(__name__)

DEFAULT_MIN_PIXELS = 10
DEFAULT_RANSAC_THRESHOLD_PX = 2.0
DEFAULT_RANSAC_ITERATIONS = 200

_SPREAD_EPS = 1e-12


def foreground_centers(mask: BinaryMask) -> NDArray[np.float64]:
    """(n, 2) array of (u, v) pixel centres; pixel (column c, row r) has centre (c + 0.5, r + 0.5)."""
    rows, cols = np.nonzero(mask.bits)
    return np.column_stack([cols + 0.5, rows + 0.5]).astype(np.float64)


def _principal_axis(points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    centroid = points.mean(axis=0)
    _, singular, vt = np.linalg.svd(points - centroid, full_matrices=False)
    if singular[0] <= _SPREAD_EPS:
        raise DegenerateCloudError(f"{len(points)} foreground pixels have no spread, cannot fit a line")
    axis = vt[0]
    # deterministic orientation: endpoint a is the one with smaller u (then smaller v)
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return centroid, axis


def _ransac_inliers(
    points: NDArray[np.float64], threshold: float, iterations: int, seed: int
) -> NDArray[np.float64]:
    """Largest consensus set of a two-point line hypothesis."""
    rng = np.random.default_rng(seed)
    best: NDArray[np.bool_] | None = None
    best_count = 0
    for _ in range(iterations):
        i, j = rng.choice(len(points), size=2, replace=False)
        direction = points[j] - points[i]
        length = float(np.hypot(direction[0], direction[1]))
        if length == 0.0:
            continue
        normal = np.array([-direction[1], direction[0]]) / length
        inliers = np.abs((points - points[i]) @ normal) <= threshold
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best, best_count = inliers, count
    if best is None:
        return points
    logger.debug("RANSAC kept %d of %d pixels", best_count, len(points))
    return points[best]


def fit_needle_line(
    mask: BinaryMask,
    min_pixels: int = DEFAULT_MIN_PIXELS,
    method: LineFitMethod = LineFitMethod.PRINCIPAL_AXIS,
    ransac_threshold_px: float = DEFAULT_RANSAC_THRESHOLD_PX,
    ransac_iterations: int = DEFAULT_RANSAC_ITERATIONS,
    ransac_seed: int = 0,
    cap_compensation: bool = True,
) -> LineSegment2D:
    """Fit the needle as a segment on the principal axis of its foreground pixels.

    The endpoints are the extreme pixel-centre projections onto the axis. With
    ``cap_compensation`` they are pulled inward by the cloud's half-width, which
    removes the overshoot of a thick mask's rounded ends.

    Args:
        mask: Needle segmentation mask
        min_pixels: Minimum number of foreground pixels
        method: Principal axis over all pixels, or RANSAC inliers first
        ransac_threshold_px: Inlier distance for RANSAC
        ransac_iterations: Hypotheses drawn by RANSAC
        ransac_seed: Seed of the RANSAC sampler
        cap_compensation: Pull endpoints in by the half-width

    Returns:
        Fitted segment, endpoint ``a`` first along the axis

    Raises:
        TooFewPixelsError: If the mask has fewer than ``min_pixels`` foreground pixels
        DegenerateCloudError: If the pixels have no spread
    """
    count = mask.foreground_count
    if count < min_pixels:
        raise TooFewPixelsError(count, min_pixels)
    points = foreground_centers(mask)
    if method == LineFitMethod.RANSAC and len(points) >= 2:
        points = _ransac_inliers(points, ransac_threshold_px, ransac_iterations, ransac_seed)

    centroid, axis = _principal_axis(points)
    normal = np.array([-axis[1], axis[0]])
    along = (points - centroid) @ axis
    lo, hi = float(along.min()), float(along.max())
    if hi - lo <= _SPREAD_EPS:
        raise DegenerateCloudError("foreground pixels project to a single point")

    if cap_compensation:
        half_width = float(np.max(np.abs((points - centroid) @ normal)))
        shrink = min(half_width, 0.25 * (hi - lo))
        lo, hi = lo + shrink, hi - shrink

    a = centroid + lo * axis
    b = centroid + hi * axis
    segment = LineSegment2D(a=ImagePoint(u=float(a[0]), v=float(a[1])), b=ImagePoint(u=float(b[0]), v=float(b[1])))
    logger.debug(
        "Fitted needle from %d pixels: (%.2f, %.2f) -> (%.2f, %.2f)",
        len(points),
        segment.a.u,
        segment.a.v,
        segment.b.u,
        segment.b.v,
    )
    return segment


def select_tip(segment: LineSegment2D, insertion_direction: Sequence[float]) -> ImagePoint:
    """Pick the endpoint that leads along the insertion direction.

    Ties (direction perpendicular to the segment) go to the larger v, then the larger u.

    Raises:
        ZeroDirectionError: If the direction is the zero vector
    """
    direction = np.asarray(insertion_direction, dtype=np.float64).reshape(-1)
    if direction.shape != (2,) or not np.all(np.isfinite(direction)):
        raise ZeroDirectionError(f"insertion direction must be a finite 2-vector, got {list(direction)}")
    if not np.any(direction):
        raise ZeroDirectionError("insertion direction must be nonzero")

    proj_a = float(np.dot([segment.a.u, segment.a.v], direction))
    proj_b = float(np.dot([segment.b.u, segment.b.v], direction))
    if np.isclose(proj_a, proj_b, rtol=1e-12, atol=1e-12):
        return max(segment.a, segment.b, key=lambda p: (p.v, p.u))
    return segment.b if proj_b > proj_a else segment.a


def back_project_depth(pixel: Sequence[float], depth_mm: float, intrinsics: PinholeIntrinsics) -> WorldPoint:
    """Back-project a depth-camera pixel with its depth to a 3-D point in the camera frame.

    Raises:
        NonPositiveDepthError: If ``depth_mm`` is not a positive finite number
    """
    if not np.isfinite(depth_mm) or depth_mm <= 0:
        raise NonPositiveDepthError(f"depth must be positive, got {depth_mm}")
    u, v = float(pixel[0]), float(pixel[1])
    return WorldPoint(
        x=(u - intrinsics.cx) * depth_mm / intrinsics.fx,
        y=(v - intrinsics.cy) * depth_mm / intrinsics.fy,
        z=float(depth_mm),
    )


def project_to_pixel(point: WorldPoint, intrinsics: PinholeIntrinsics) -> tuple[float, float]:
    """Project a camera-frame point to a pixel; inverse of :func:`back_project_depth`.

    Raises:
        NonPositiveDepthError: If the point is not in front of the camera
    """
    if point.z <= 0:
        raise NonPositiveDepthError(f"point must be in front of the camera, got z={point.z}")
    return (
        intrinsics.fx * point.x / point.z + intrinsics.cx,
        intrinsics.fy * point.y / point.z + intrinsics.cy,
    )
