"""Data models for the ultrasound calibration toolkit."""

from collections.abc import Iterable, Sequence
from enum import Enum
from typing import Self

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Matrix = tuple[tuple[float, ...], ...]

ORTHONORMAL_TOL = 1e-9
COMPOSITION_TOL = 1e-12

_VALUE_CONFIG = ConfigDict(frozen=True, allow_inf_nan=False)


def _as_matrix(array: NDArray[np.float64]) -> Matrix:
    return tuple(tuple(float(x) for x in row) for row in np.asarray(array, dtype=np.float64))


def _check_shape(matrix: Matrix, rows: int, cols: int, name: str) -> None:
    if len(matrix) != rows or any(len(row) != cols for row in matrix):
        shape = f"{len(matrix)}x{len(matrix[0]) if matrix else 0}"
        raise ValueError(f"{name} must be {rows}x{cols}, got {shape}")


def _read_only(matrix: Matrix) -> NDArray[np.float64]:
    array = np.array(matrix, dtype=np.float64)
    array.setflags(write=False)
    return array


class TransformKind(str, Enum):
    """Kinds of transform files."""

    EXTRINSIC = "extrinsic"
    INTRINSIC = "intrinsic"
    TOTAL = "total"


class LineFitMethod(str, Enum):
    """Needle line estimators."""

    PRINCIPAL_AXIS = "principal-axis"
    RANSAC = "ransac"


class ImagePoint(BaseModel):
    """Point in the US image, pixels; origin at the top of the image centre-line, v downward."""

    model_config = _VALUE_CONFIG

    u: float = Field(..., description="Horizontal pixel coordinate (may be negative)")
    v: float = Field(..., description="Vertical pixel coordinate, downward")

    def homogeneous(self) -> NDArray[np.float64]:
        """Return [u, v, 1]."""
        return np.array([self.u, self.v, 1.0])


class WorldPoint(BaseModel):
    """Point in the depth-camera (world) frame, millimetres; optical centre is the origin."""

    model_config = _VALUE_CONFIG

    x: float = Field(..., description="x_r in mm")
    y: float = Field(..., description="y_r in mm")
    z: float = Field(..., description="z_r in mm")

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.z])

    def homogeneous(self) -> NDArray[np.float64]:
        """Return [x, y, z, 1]."""
        return np.array([self.x, self.y, self.z, 1.0])


class PointPair(BaseModel):
    """One needle-tip correspondence, seen in the US image and by the depth camera."""

    model_config = _VALUE_CONFIG

    index: int = Field(..., ge=1, description="1-based record number")
    image: ImagePoint = Field(..., description="Tip in the US image")
    world: WorldPoint = Field(..., description="Tip in the depth-camera frame")


class PointPairSet(BaseModel):
    """Ordered correspondences; column order of the point matrices follows this order."""

    model_config = _VALUE_CONFIG

    pairs: tuple[PointPair, ...] = Field(default=(), description="Correspondences in order")

    @property
    def n(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_arrays(cls, pixels: Sequence[Sequence[float]], world: Sequence[Sequence[float]]) -> Self:
        """Build a set from (n, 2) pixels and (n, 3) world points, numbering records from 1."""
        if len(pixels) != len(world):
            raise ValueError(f"got {len(pixels)} pixels but {len(world)} world points")
        return cls(
            pairs=tuple(
                PointPair(
                    index=k + 1,
                    image=ImagePoint(u=float(p[0]), v=float(p[1])),
                    world=WorldPoint(x=float(w[0]), y=float(w[1]), z=float(w[2])),
                )
                for k, (p, w) in enumerate(zip(pixels, world, strict=True))
            )
        )

    def pixel_array(self) -> NDArray[np.float64]:
        """Pixels as an (n, 2) array."""
        return np.array([[p.image.u, p.image.v] for p in self.pairs], dtype=np.float64).reshape(-1, 2)

    def world_array(self) -> NDArray[np.float64]:
        """World points as an (n, 3) array."""
        return np.array([[p.world.x, p.world.y, p.world.z] for p in self.pairs], dtype=np.float64).reshape(-1, 3)

    def subset(self, indices: Iterable[int]) -> "PointPairSet":
        """Pairs whose record numbers are listed, in the listed order."""
        by_index = {pair.index: pair for pair in self.pairs}
        chosen = []
        for index in indices:
            if index not in by_index:
                raise ValueError(f"record {index} not in pair set (records {sorted(by_index)})")
            chosen.append(by_index[index])
        return PointPairSet(pairs=tuple(chosen))

    def complement(self, indices: Iterable[int]) -> "PointPairSet":
        """Pairs whose record numbers are NOT listed, in original order."""
        excluded = set(indices)
        return PointPairSet(pairs=tuple(pair for pair in self.pairs if pair.index not in excluded))


class ExtrinsicTransform(BaseModel):
    """Rigid transform from the US-probe frame to the depth-camera frame (mm)."""

    model_config = _VALUE_CONFIG

    matrix: Matrix = Field(..., description="4x4 homogeneous matrix, row-major")

    @field_validator("matrix")
    @classmethod
    def _validate_rigid(cls, matrix: Matrix) -> Matrix:
        _check_shape(matrix, 4, 4, "extrinsic matrix")
        if tuple(matrix[3]) != (0.0, 0.0, 0.0, 1.0):
            raise ValueError(f"extrinsic bottom row must be exactly [0, 0, 0, 1], got {list(matrix[3])}")
        rotation = np.array(matrix, dtype=np.float64)[:3, :3]
        deviation = float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))
        if deviation > ORTHONORMAL_TOL:
            raise ValueError(f"extrinsic rotation block is not orthonormal (deviation {deviation:.3e})")
        return matrix

    @classmethod
    def from_array(cls, array: NDArray[np.float64]) -> Self:
        return cls(matrix=_as_matrix(array))

    @classmethod
    def from_translation(cls, dx: float, dy: float, dz: float) -> Self:
        """Pure-translation extrinsic, the form of the calibration bracket."""
        array = np.eye(4)
        array[:3, 3] = (dx, dy, dz)
        return cls.from_array(array)

    @property
    def array(self) -> NDArray[np.float64]:
        return _read_only(self.matrix)

    @property
    def rotation(self) -> NDArray[np.float64]:
        return self.array[:3, :3]

    @property
    def translation(self) -> NDArray[np.float64]:
        return self.array[:3, 3]


class IntrinsicMatrix(BaseModel):
    """Intrinsic matrix with columns (u scale, v scale, origin), homogeneous pixels to probe-frame mm."""

    model_config = _VALUE_CONFIG

    matrix: Matrix = Field(..., description="4x3 matrix, row-major")

    @field_validator("matrix")
    @classmethod
    def _validate_shape(cls, matrix: Matrix) -> Matrix:
        _check_shape(matrix, 4, 3, "intrinsic matrix")
        return matrix

    @classmethod
    def from_array(cls, array: NDArray[np.float64]) -> Self:
        return cls(matrix=_as_matrix(array))

    @property
    def array(self) -> NDArray[np.float64]:
        return _read_only(self.matrix)

    @property
    def u_scale(self) -> NDArray[np.float64]:
        """mm per pixel along u."""
        return self.array[:, 0]

    @property
    def v_scale(self) -> NDArray[np.float64]:
        """mm per pixel along v."""
        return self.array[:, 1]

    @property
    def origin(self) -> NDArray[np.float64]:
        """Image origin in the probe frame."""
        return self.array[:, 2]

    @property
    def pixel_spacing_mm(self) -> tuple[float, float]:
        """Physical size of one pixel along u and along v, mm."""
        return float(np.linalg.norm(self.u_scale[:3])), float(np.linalg.norm(self.v_scale[:3]))


class CalibrationDiagnostics(BaseModel):
    """Conditioning and fit quality of a solve."""

    model_config = _VALUE_CONFIG

    rank: int = Field(..., ge=0, description="Numerical rank of the pixel matrix")
    condition: float = Field(..., ge=1.0, description="Condition number of the pixel matrix")
    residual_frobenius: float = Field(..., ge=0.0, description="Least-squares residual, mm")


class Calibration(BaseModel):
    """Solved calibration; total = extrinsic x intrinsic maps pixels to world mm."""

    model_config = _VALUE_CONFIG

    extrinsic: ExtrinsicTransform
    intrinsic: IntrinsicMatrix
    total: Matrix = Field(..., description="4x3 matrix extrinsic x intrinsic")
    diagnostics: CalibrationDiagnostics | None = Field(None, description="Present when the calibration was solved")

    @model_validator(mode="after")
    def _validate_composition(self) -> Self:
        _check_shape(self.total, 4, 3, "total matrix")
        expected = self.extrinsic.array @ self.intrinsic.array
        scale = 1.0 + float(np.max(np.abs(expected)))
        if not np.allclose(np.array(self.total), expected, rtol=0.0, atol=COMPOSITION_TOL * scale):
            raise ValueError("total matrix does not equal extrinsic x intrinsic")
        return self

    @classmethod
    def compose(
        cls,
        extrinsic: ExtrinsicTransform,
        intrinsic: IntrinsicMatrix,
        diagnostics: CalibrationDiagnostics | None = None,
    ) -> Self:
        total = extrinsic.array @ intrinsic.array
        return cls(extrinsic=extrinsic, intrinsic=intrinsic, total=_as_matrix(total), diagnostics=diagnostics)

    @property
    def total_array(self) -> NDArray[np.float64]:
        return _read_only(self.total)


class StructureReport(BaseModel):
    """How far an intrinsic matrix is from the coplanar structure (row 3 = 0, row 4 = [0,0,1])."""

    model_config = _VALUE_CONFIG

    row3_max_abs: float = Field(..., ge=0.0, description="max |entry| of row 3, mm")
    row4_max_deviation: float = Field(..., ge=0.0, description="max deviation of row 4 from [0, 0, 1]")
    tol_mm: float = Field(..., gt=0.0, description="Tolerance used")

    @property
    def compliant(self) -> bool:
        return self.row3_max_abs <= self.tol_mm and self.row4_max_deviation <= self.tol_mm


class PointError(BaseModel):
    """Error of one evaluated correspondence."""

    model_config = _VALUE_CONFIG

    index: int = Field(..., ge=1, description="Record number")
    image: ImagePoint = Field(..., description="Evaluated pixel")
    predicted: WorldPoint = Field(..., description="Total matrix applied to the pixel")
    measured: WorldPoint = Field(..., description="Point measured by the depth camera")
    error_mm: float = Field(..., ge=0.0, description="Distance between predicted and measured, mm")


class ErrorReport(BaseModel):
    """Per-point errors with calibration reproducibility (mean) and target registration error (RMS)."""

    model_config = _VALUE_CONFIG

    per_point: tuple[PointError, ...]
    cr_mm: float = Field(..., ge=0.0, description="Calibration reproducibility, mean error")
    tre_mm: float = Field(..., ge=0.0, description="Target registration error, RMS error")
    n: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _validate_aggregates(self) -> Self:
        if self.n != len(self.per_point):
            raise ValueError(f"n={self.n} but {len(self.per_point)} per-point entries")
        # RMS >= mean for nonnegative values
        if self.cr_mm > self.tre_mm * (1.0 + 1e-12) + 1e-15:
            raise ValueError(f"CR {self.cr_mm} exceeds TRE {self.tre_mm}")
        return self


class LineSegment2D(BaseModel):
    """Fitted needle segment in the US image, pixels."""

    model_config = _VALUE_CONFIG

    a: ImagePoint
    b: ImagePoint

    @model_validator(mode="after")
    def _validate_distinct(self) -> Self:
        if self.a == self.b:
            raise ValueError("segment endpoints must differ")
        return self

    @property
    def length(self) -> float:
        return float(np.hypot(self.b.u - self.a.u, self.b.v - self.a.v))


class PinholeIntrinsics(BaseModel):
    """Depth-camera pinhole model, pixels."""

    model_config = _VALUE_CONFIG

    fx: float = Field(..., gt=0.0, description="Focal length along u, pixels")
    fy: float = Field(..., gt=0.0, description="Focal length along v, pixels")
    cx: float = Field(..., description="Principal point u, pixels")
    cy: float = Field(..., description="Principal point v, pixels")


class BinaryMask(BaseModel):
    """Needle segmentation mask; ``bits[row, column]`` is True on the needle."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray = Field(..., description="(height, width) boolean grid")

    @field_validator("bits", mode="before")
    @classmethod
    def _validate_bits(cls, bits: object) -> np.ndarray:
        array = np.array(bits, dtype=bool)
        if array.ndim != 2 or array.size == 0:
            raise ValueError(f"mask must be a nonempty 2-D grid, got shape {array.shape}")
        array.setflags(write=False)
        return array

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.bits))


class PixelRange(BaseModel):
    """Rectangle pixels are drawn from."""

    model_config = _VALUE_CONFIG

    u_min: float = -150.0
    u_max: float = 150.0
    v_min: float = 0.0
    v_max: float = 400.0

    @model_validator(mode="after")
    def _validate_nonempty(self) -> Self:
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ValueError(f"empty pixel range u[{self.u_min}, {self.u_max}] v[{self.v_min}, {self.v_max}]")
        return self


class ScenarioSpec(BaseModel):
    """Synthetic calibration scenario."""

    model_config = _VALUE_CONFIG

    ground_truth_intrinsic: IntrinsicMatrix
    extrinsic: ExtrinsicTransform
    n_points: int = Field(default=10, ge=3, description="Number of correspondences")
    pixel_noise_sigma: float = Field(default=0.0, ge=0.0, description="Pixel noise, pixels")
    world_noise_sigma: float = Field(default=0.0, ge=0.0, description="Isotropic world noise, mm")
    pixel_range: PixelRange = Field(default_factory=PixelRange)
    seed: int = Field(default=0, ge=0, description="PRNG seed")


class SweepRow(BaseModel):
    """Aggregate of the trials run at one noise level."""

    model_config = _VALUE_CONFIG

    sigma: float = Field(..., ge=0.0, description="World noise sigma, mm")
    mean_cr: float = Field(..., ge=0.0)
    mean_tre: float = Field(..., ge=0.0)
    intrinsic_error: float = Field(..., ge=0.0, description="Mean relative Frobenius error of the refit intrinsic")


class PairFileRecord(BaseModel):
    """One line of a point pair CSV."""

    model_config = _VALUE_CONFIG

    u: float
    v: float
    x: float
    y: float
    z: float


_TRANSFORM_SHAPES = {
    TransformKind.EXTRINSIC: (4, 4),
    TransformKind.INTRINSIC: (4, 3),
    TransformKind.TOTAL: (4, 3),
}


class TransformFile(BaseModel):
    """JSON transform file: {kind, rows, cols, entries}."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    kind: TransformKind
    rows: int = Field(..., ge=1)
    cols: int = Field(..., ge=1)
    entries: list[float] = Field(..., description="Row-major entries")

    @model_validator(mode="after")
    def _validate_shape(self) -> Self:
        expected = _TRANSFORM_SHAPES[self.kind]
        if (self.rows, self.cols) != expected:
            raise ValueError(f"{self.kind.value} must be {expected[0]}x{expected[1]}, got {self.rows}x{self.cols}")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"expected {self.rows * self.cols} entries, got {len(self.entries)}")
        return self

    def as_array(self) -> NDArray[np.float64]:
        return np.array(self.entries, dtype=np.float64).reshape(self.rows, self.cols)
