"""Accuracy metrics: per-point error, calibration reproducibility (CR) and target registration error (TRE)."""

import math
from collections.abc import Sequence

import numpy as np

from .calibration import DEFAULT_HOMOGENEOUS_TOL, map_image_to_world
from .errors import EmptyEvaluationError
from .models import Calibration, ErrorReport, ImagePoint, PointError, PointPairSet, WorldPoint


def point_error(predicted: WorldPoint, measured: WorldPoint) -> float:
    """Euclidean distance between two world points, mm."""
    return float(np.linalg.norm(predicted.as_array() - measured.as_array()))


def aggregate_errors(errors: Sequence[float]) -> tuple[float, float]:
    """CR (mean) and TRE (root mean square) of per-point errors.

    Raises:
        EmptyEvaluationError: If there are no errors
    """
    if len(errors) == 0:
        raise EmptyEvaluationError("cannot aggregate an empty error list")
    values = np.asarray(errors, dtype=np.float64)
    cr = float(np.mean(values))
    tre = math.sqrt(float(np.mean(values**2)))
    # mean <= RMS holds exactly; rounding must not break it
    return min(cr, tre), tre


def report_from_points(
    indices: Sequence[int],
    pixels: Sequence[tuple[float, float]],
    predicted: Sequence[WorldPoint],
    measured: Sequence[WorldPoint],
) -> ErrorReport:
    """Assemble an ErrorReport from already-mapped points."""
    per_point = tuple(
        PointError(
            index=index,
            image=ImagePoint(u=pixel[0], v=pixel[1]),
            predicted=pred,
            measured=meas,
            error_mm=point_error(pred, meas),
        )
        for index, pixel, pred, meas in zip(indices, pixels, predicted, measured, strict=True)
    )
    cr, tre = aggregate_errors([entry.error_mm for entry in per_point])
    return ErrorReport(per_point=per_point, cr_mm=cr, tre_mm=tre, n=len(per_point))


def compute_report(
    calibration: Calibration,
    eval_pairs: PointPairSet,
    homogeneous_tol: float = DEFAULT_HOMOGENEOUS_TOL,
) -> ErrorReport:
    """Map every evaluation pixel and compare it with its measured world point.

    Raises:
        EmptyEvaluationError: If the evaluation set is empty
    """
    if eval_pairs.n == 0:
        raise EmptyEvaluationError("evaluation set is empty")
    return report_from_points(
        indices=[pair.index for pair in eval_pairs.pairs],
        pixels=[(pair.image.u, pair.image.v) for pair in eval_pairs.pairs],
        predicted=[map_image_to_world(calibration, pair.image, homogeneous_tol) for pair in eval_pairs.pairs],
        measured=[pair.world for pair in eval_pairs.pairs],
    )
