"""SVG scatter of measured against calibrated points."""

import logging
from pathlib import Path

from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from .models import ErrorReport

logger = logging.getLogger(__name__)


def write_residual_svg(path: Path, report: ErrorReport, title: str = "Physical vs calibrated points") -> None:
    """Plot measured and predicted points in the x-y plane of the depth camera.

    Measured markers are grouped under the SVG id ``measured`` and predicted
    markers under ``predicted``; each point pair is joined by a residual segment.
    """
    measured = [(entry.measured.x, entry.measured.y) for entry in report.per_point]
    predicted = [(entry.predicted.x, entry.predicted.y) for entry in report.per_point]

    figure = Figure(figsize=(6.0, 5.0))
    ax = figure.add_subplot()
    residuals = LineCollection(
        [[m, p] for m, p in zip(measured, predicted, strict=True)], colors="0.6", linewidths=0.8
    )
    residuals.set_gid("residuals")
    ax.add_collection(residuals)
    ax.scatter(*zip(*measured, strict=True), marker="o", color="tab:blue", label="Physical point", gid="measured")
    ax.scatter(*zip(*predicted, strict=True), marker="x", color="tab:red", label="Calibration point", gid="predicted")
    for entry in report.per_point:
        ax.annotate(str(entry.index), (entry.measured.x, entry.measured.y), fontsize=7, xytext=(3, 3),
                    textcoords="offset points")

    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title(f"{title}\nCR {report.cr_mm:.4f} mm, TRE {report.tre_mm:.4f} mm")
    ax.invert_yaxis()
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("Wrote residual plot %s", path)
