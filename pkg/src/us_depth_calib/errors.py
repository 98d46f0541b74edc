"""Error hierarchy for the calibration toolkit.

Every error carries a machine-greppable ``code`` and an ``exit_code`` so the
command-line layer can report it as a single ``E_CODE: message`` line.
"""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line interface."""

    SUCCESS = 0
    USAGE = 2
    DATA = 3
    NUMERICAL = 4


class CalibrationError(Exception):
    """Base class for all toolkit errors."""

    code = "E_CALIBRATION"
    exit_code = ExitCode.DATA

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def cli_line(self) -> str:
        """Render the error as a single-line CLI message."""
        return f"{self.code}: {self.message}".replace("\n", " ")


class UsageError(CalibrationError):
    """Command-line arguments are invalid or inconsistent."""

    code = "E_USAGE"
    exit_code = ExitCode.USAGE


class DimensionMismatchError(CalibrationError):
    """Matrix shapes do not agree."""

    code = "E_DIMENSION_MISMATCH"
    exit_code = ExitCode.NUMERICAL


class RankDeficientError(CalibrationError):
    """Image points are collinear, the pixel matrix is not of rank 3."""

    code = "E_RANK_DEFICIENT"
    exit_code = ExitCode.NUMERICAL

    def __init__(self, rank: int, required: int = 3):
        super().__init__(
            f"pixel matrix has numerical rank {rank}, need {required}: "
            "calibration pixels must include at least three non-collinear points"
        )
        self.rank = rank
        self.required = required


class SvdConvergenceError(CalibrationError):
    """Singular value decomposition did not converge."""

    code = "E_SVD_NO_CONVERGENCE"
    exit_code = ExitCode.NUMERICAL


class NonFiniteError(CalibrationError):
    """A NaN or infinite value entered or left a matrix operation."""

    code = "E_NON_FINITE"
    exit_code = ExitCode.NUMERICAL


class HomogeneousComponentError(CalibrationError):
    """The mapped point's homogeneous component is not 1 (corrupt calibration)."""

    code = "E_HOMOGENEOUS"
    exit_code = ExitCode.NUMERICAL


class EmptyEvaluationError(CalibrationError):
    """No point pairs were given to evaluate."""

    code = "E_EMPTY_EVALUATION"


class TooFewPixelsError(CalibrationError):
    """The mask holds fewer foreground pixels than required."""

    code = "E_TOO_FEW_PIXELS"

    def __init__(self, count: int, required: int):
        super().__init__(f"mask has {count} foreground pixels, need at least {required}")
        self.count = count
        self.required = required


class DegenerateCloudError(CalibrationError):
    """The foreground pixels have no spread, no line can be fitted."""

    code = "E_DEGENERATE_CLOUD"


class ZeroDirectionError(CalibrationError):
    """Insertion direction vector is zero."""

    code = "E_ZERO_DIRECTION"
    exit_code = ExitCode.USAGE


class NonPositiveDepthError(CalibrationError):
    """Depth value for back-projection is not positive."""

    code = "E_NONPOSITIVE_DEPTH"


class SegmentOutOfBoundsError(CalibrationError):
    """A segment to render lies (partly) outside the image."""

    code = "E_SEGMENT_OUT_OF_BOUNDS"


class DegeneratePixelRangeError(CalibrationError):
    """The simulator could not draw rank-3 pixels from the configured range."""

    code = "E_DEGENERATE_RANGE"
    exit_code = ExitCode.NUMERICAL


class InvalidScenarioError(CalibrationError):
    """Scenario parameters violate their ranges."""

    code = "E_INVALID_SCENARIO"
    exit_code = ExitCode.USAGE


class MissingFileError(CalibrationError):
    """An input file does not exist."""

    code = "E_MISSING_FILE"


class MalformedFileError(CalibrationError):
    """An input file cannot be parsed."""

    code = "E_MALFORMED_FILE"

    def __init__(self, path: str, message: str, line: int | None = None):
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class MalformedCsvError(MalformedFileError):
    """Point pair CSV cannot be parsed."""

    code = "E_MALFORMED_CSV"


class MalformedTransformError(MalformedFileError):
    """Transform JSON cannot be parsed or has the wrong shape."""

    code = "E_MALFORMED_TRANSFORM"


class MalformedPgmError(MalformedFileError):
    """Mask file is not a readable P2/P4 image."""

    code = "E_MALFORMED_PGM"


class ConfigError(CalibrationError):
    """Settings file is unreadable or invalid."""

    code = "E_BAD_CONFIG"
