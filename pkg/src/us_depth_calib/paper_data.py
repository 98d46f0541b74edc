"""Published calibration data of the depth-camera bracket rig.

Ten needle-tip correspondences with the calibrated points and errors printed
next to them, the bracket extrinsic, the fitted intrinsic and the literature
comparison. The same data ships as files under ``data/paper/``.
"""

import logging
from typing import NamedTuple

import numpy as np

from .calibration import map_image_to_world
from .metrics import point_error, report_from_points
from .models import (
    Calibration,
    ErrorReport,
    ExtrinsicTransform,
    ImagePoint,
    IntrinsicMatrix,
    PointPairSet,
    WorldPoint,
)

logger = logging.getLogger(__name__)


class PublishedRow(NamedTuple):
    """One row of the published results table."""

    no: int
    u: float
    v: float
    measured: tuple[float, float, float]
    calibrated: tuple[float, float, float]
    error_mm: float


PUBLISHED_ROWS: tuple[PublishedRow, ...] = (
    PublishedRow(1, 88, 234, (66.40, 59.94, 349.0), (66.488, 59.764, 349.0), 0.1968),
    PublishedRow(2, 91, 291, (68.70, 77.60, 349.0), (67.933, 79.719, 349.0), 2.2535),
    PublishedRow(3, 79, 153, (62.18, 33.07, 349.0), (62.817, 31.420, 349.0), 1.7686),
    PublishedRow(4, 43, 162, (49.51, 35.52, 349.0), (51.604, 34.654, 349.0), 2.2660),
    PublishedRow(5, 28, 155, (44.14, 33.45, 349.0), (45.400, 32.247, 349.0), 1.7421),
    PublishedRow(6, 10, 251, (39.46, 64.71, 349.0), (39.955, 65.912, 349.0), 1.2999),
    PublishedRow(7, -49, 224, (18.41, 56.87, 349.0), (19.591, 56.603, 349.0), 1.2108),
    PublishedRow(8, -72, 73, (9.97, 3.96, 349.0), (10.619, 3.778, 349.0), 0.6740),
    PublishedRow(9, -142, 303, (-11.91, 84.29, 349.0), (-11.613, 84.501, 349.0), 0.3643),
    PublishedRow(10, -62, 154, (14.58, 29.23, 349.0), (14.633, 32.121, 349.0), 2.8915),
)

PUBLISHED_CR_MM = 1.4668
PUBLISHED_TRE_MM = 1.6887

# Bracket offsets along x, y, z in mm
BRACKET_TRANSLATION_MM = (35.31, -50.24, 349.00)

PUBLISHED_INTRINSIC = (
    (0.3418, 0.0074, -0.6193),
    (-0.0025, 0.3502, 28.2740),
    (0.0, 0.0, 0.0),
    (0.0, 0.0, 1.0),
)


class BaselineMethod(NamedTuple):
    """Literature accuracy of another calibration method."""

    name: str
    cr_mm: float
    tre_mm: float


LITERATURE_BASELINES: tuple[BaselineMethod, ...] = (
    BaselineMethod("N-wire phantom", 1.97, 2.06),
    BaselineMethod("Multi-wedge phantom", 1.58, 1.80),
)


# Printed calibrated points carry three decimals, printed matrices four
REPRODUCTION_TOL_MM = 0.05


class ReproducedRow(NamedTuple):
    """A published row next to the point recomputed from the printed matrices."""

    row: PublishedRow
    recomputed: WorldPoint
    recomputed_error_mm: float
    discrepancy_mm: float

    @property
    def consistent(self) -> bool:
        return self.discrepancy_mm <= REPRODUCTION_TOL_MM


def published_extrinsic() -> ExtrinsicTransform:
    return ExtrinsicTransform.from_translation(*BRACKET_TRANSLATION_MM)


def published_intrinsic() -> IntrinsicMatrix:
    return IntrinsicMatrix(matrix=PUBLISHED_INTRINSIC)


def published_pairs() -> PointPairSet:
    """The ten correspondences, pixels with the physically measured points."""
    return PointPairSet.from_arrays(
        [(row.u, row.v) for row in PUBLISHED_ROWS], [row.measured for row in PUBLISHED_ROWS]
    )


def published_calibration() -> Calibration:
    return Calibration.compose(published_extrinsic(), published_intrinsic())


def published_calibrated_points() -> list[WorldPoint]:
    """Calibrated points as printed in the table."""
    return [WorldPoint(x=row.calibrated[0], y=row.calibrated[1], z=row.calibrated[2]) for row in PUBLISHED_ROWS]


def published_report() -> ErrorReport:
    """Errors of the printed calibrated points against the measured points."""
    return report_from_points(
        indices=[row.no for row in PUBLISHED_ROWS],
        pixels=[(row.u, row.v) for row in PUBLISHED_ROWS],
        predicted=published_calibrated_points(),
        measured=[WorldPoint(x=row.measured[0], y=row.measured[1], z=row.measured[2]) for row in PUBLISHED_ROWS],
    )


def reproduce_published_rows() -> list[ReproducedRow]:
    """Map every published pixel through the printed matrices.

    The discrepancy is the largest coordinate difference between the recomputed
    and the printed calibrated point. Row 4 of the table does not follow from the
    printed matrices (x differs by about 1 mm); it is reported, not corrected.
    """
    calibration = published_calibration()
    reproduced = []
    for row in PUBLISHED_ROWS:
        recomputed = map_image_to_world(calibration, ImagePoint(u=row.u, v=row.v))
        measured = WorldPoint(x=row.measured[0], y=row.measured[1], z=row.measured[2])
        discrepancy = float(np.max(np.abs(recomputed.as_array() - np.array(row.calibrated))))
        reproduced.append(
            ReproducedRow(
                row=row,
                recomputed=recomputed,
                recomputed_error_mm=point_error(recomputed, measured),
                discrepancy_mm=discrepancy,
            )
        )
    inconsistent = [item.row.no for item in reproduced if not item.consistent]
    if inconsistent:
        logger.info("Published rows not reproduced by the printed matrices: %s", inconsistent)
    return reproduced
