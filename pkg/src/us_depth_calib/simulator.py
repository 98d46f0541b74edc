"""Synthetic scenes: ground-truth calibrations, correspondences, needle masks and noise sweeps.

All randomness comes from ``numpy.random.default_rng`` seeded by the scenario seed;
sweep trial ``k`` draws from the stream derived from ``(seed, k)`` so results do not
depend on how trials are scheduled.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from functools import partial

import numpy as np
from numpy.typing import NDArray

from .calibration import solve_intrinsic
from .errors import DegeneratePixelRangeError, InvalidScenarioError, SegmentOutOfBoundsError
from .linalg import DEFAULT_RANK_TOL, rank_and_condition
from .metrics import compute_report
from .models import (
    BinaryMask,
    Calibration,
    CalibrationDiagnostics,
    ImagePoint,
    IntrinsicMatrix,
    LineSegment2D,
    PointPairSet,
    ScenarioSpec,
    SweepRow,
)

logger = logging.getLogger(__name__)

MAX_DRAW_ATTEMPTS = 100

# Child streams of a scenario seed; the pixel draw uses the seed itself.
MASK_STREAM = 0
INTRINSIC_STREAM = 1

SCALE_RANGE_MM_PER_PX = (0.2, 0.5)
OFFSET_RANGE_MM = (-50.0, 50.0)
MAX_IMAGE_ROTATION_RAD = 0.05


def random_structured_intrinsic(rng: np.random.Generator) -> IntrinsicMatrix:
    """Draw an intrinsic with coplanar structure, bracketing the published probe values."""
    scale_u, scale_v = rng.uniform(*SCALE_RANGE_MM_PER_PX, size=2)
    offset_u, offset_v = rng.uniform(*OFFSET_RANGE_MM, size=2)
    angle = rng.uniform(-MAX_IMAGE_ROTATION_RAD, MAX_IMAGE_ROTATION_RAD)
    cos, sin = np.cos(angle), np.sin(angle)
    return IntrinsicMatrix.from_array(
        np.array(
            [
                [scale_u * cos, -scale_v * sin, offset_u],
                [scale_u * sin, scale_v * cos, offset_v],
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
    )


def trial_seed(seed: int, trial: int) -> int:
    """Seed of trial ``trial``, derived from the scenario seed."""
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def child_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for child stream ``stream`` of ``seed``, independent of ``default_rng(seed)``."""
    if seed < 0:
        raise InvalidScenarioError(f"seed must be nonnegative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(stream + 1)[stream])


def truth_intrinsic_for_seed(seed: int) -> IntrinsicMatrix:
    """Ground-truth intrinsic of the scene generated from ``seed``."""
    return random_structured_intrinsic(child_rng(seed, INTRINSIC_STREAM))


def _draw_pixels(spec: ScenarioSpec, rng: np.random.Generator) -> tuple[NDArray[np.float64], int, float]:
    box = spec.pixel_range
    for attempt in range(1, MAX_DRAW_ATTEMPTS + 1):
        pixels = np.column_stack(
            [
                rng.uniform(box.u_min, box.u_max, size=spec.n_points),
                rng.uniform(box.v_min, box.v_max, size=spec.n_points),
            ]
        )
        homogeneous = np.vstack([pixels.T, np.ones(spec.n_points)])
        rank, condition = rank_and_condition(homogeneous, DEFAULT_RANK_TOL)
        if rank == 3:
            if attempt > 1:
                logger.debug("Drew rank-3 pixels after %d attempts", attempt)
            return pixels, rank, condition
    raise DegeneratePixelRangeError(
        f"no rank-3 pixel set in {MAX_DRAW_ATTEMPTS} draws from u[{box.u_min}, {box.u_max}] v[{box.v_min}, {box.v_max}]"
    )


def generate_pairs(spec: ScenarioSpec) -> tuple[PointPairSet, Calibration]:
    """Forward-map random pixels through the ground truth and corrupt the measurements.

    World points are generated from the noiseless pixels; pixel noise is added
    afterwards, so it corrupts the measurement, not the geometry.

    Returns:
        (correspondences, ground-truth calibration)

    Raises:
        DegeneratePixelRangeError: If no rank-3 pixel set is drawn in 100 attempts
    """
    rng = np.random.default_rng(spec.seed)
    pixels, rank, condition = _draw_pixels(spec, rng)

    truth = Calibration.compose(
        spec.extrinsic,
        spec.ground_truth_intrinsic,
        CalibrationDiagnostics(rank=rank, condition=condition, residual_frobenius=0.0),
    )
    homogeneous = np.vstack([pixels.T, np.ones(spec.n_points)])
    world = (truth.extrinsic.array @ (truth.intrinsic.array @ homogeneous))[:3, :].T
    world = world + rng.normal(0.0, spec.world_noise_sigma, size=world.shape)
    measured_pixels = pixels + rng.normal(0.0, spec.pixel_noise_sigma, size=pixels.shape)
    return PointPairSet.from_arrays(measured_pixels.tolist(), world.tolist()), truth


def relative_frobenius_error(estimate: NDArray[np.float64], truth: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))


def render_needle_mask(segment: LineSegment2D, width: int, height: int, thickness: float) -> BinaryMask:
    """Rasterize a segment: every pixel whose centre lies within thickness/2 of it is set.

    Raises:
        SegmentOutOfBoundsError: If an endpoint lies outside the image
        InvalidScenarioError: If the thickness is below one pixel or the image is empty
    """
    if thickness < 1:
        raise InvalidScenarioError(f"thickness must be at least 1 pixel, got {thickness}")
    if width < 1 or height < 1:
        raise InvalidScenarioError(f"image must be nonempty, got {width}x{height}")
    for end in (segment.a, segment.b):
        if not (0.0 <= end.u <= width and 0.0 <= end.v <= height):
            raise SegmentOutOfBoundsError(f"endpoint ({end.u}, {end.v}) outside {width}x{height} image")

    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    start = np.array([segment.a.u, segment.a.v])
    direction = np.array([segment.b.u, segment.b.v]) - start
    t = ((cols - start[0]) * direction[0] + (rows - start[1]) * direction[1]) / float(direction @ direction)
    t = np.clip(t, 0.0, 1.0)
    distance = np.hypot(cols - (start[0] + t * direction[0]), rows - (start[1] + t * direction[1]))
    return BinaryMask(bits=distance <= thickness / 2.0)


def random_segment(
    rng: np.random.Generator, width: int, height: int, min_length: float = 40.0, margin: float = 5.0
) -> LineSegment2D:
    """Draw a segment of at least ``min_length`` pixels inside the image margins."""
    if width - 2 * margin < min_length and height - 2 * margin < min_length:
        raise InvalidScenarioError(f"cannot fit a {min_length}-pixel segment into a {width}x{height} image")
    for _ in range(MAX_DRAW_ATTEMPTS):
        a = rng.uniform([margin, margin], [width - margin, height - margin])
        b = rng.uniform([margin, margin], [width - margin, height - margin])
        if np.hypot(*(b - a)) >= min_length:
            return LineSegment2D(a=ImagePoint(u=a[0], v=a[1]), b=ImagePoint(u=b[0], v=b[1]))
    raise InvalidScenarioError(f"cannot fit a {min_length}-pixel segment into a {width}x{height} image")


def random_needle_masks(
    seed: int,
    count: int,
    width: int,
    height: int,
    thickness_range: tuple[float, float] = (1.0, 5.0),
) -> list[tuple[LineSegment2D, float, BinaryMask]]:
    """Render ``count`` needle masks with random poses and thicknesses.

    Returns:
        (true segment, thickness, mask) per needle
    """
    if count < 0:
        raise InvalidScenarioError(f"mask count must be nonnegative, got {count}")
    rng = child_rng(seed, MASK_STREAM)
    needles = []
    for _ in range(count):
        segment = random_segment(rng, width, height)
        thickness = float(rng.uniform(*thickness_range))
        needles.append((segment, thickness, render_needle_mask(segment, width, height, thickness)))
    return needles


def _run_trial(template: ScenarioSpec, sigma: float, trial: int) -> tuple[float, float, float]:
    spec = template.model_copy(update={"world_noise_sigma": sigma, "seed": trial_seed(template.seed, trial)})
    pairs, truth = generate_pairs(spec)
    solved = solve_intrinsic(pairs, spec.extrinsic)
    report = compute_report(solved, pairs)
    error = relative_frobenius_error(solved.intrinsic.array, truth.intrinsic.array)
    return report.cr_mm, report.tre_mm, error


def noise_sweep(
    template: ScenarioSpec, sigmas: Sequence[float], trials: int, workers: int = 1
) -> list[SweepRow]:
    """Refit calibrations at several world-noise levels and average CR, TRE and intrinsic error.

    Trial ``k`` uses the same PRNG stream at every sigma, so the noise draws differ
    only in scale between rows.

    Args:
        template: Scenario whose world_noise_sigma and seed are replaced per trial
        sigmas: World noise levels, mm
        trials: Trials per level
        workers: Threads running trials

    Returns:
        One row per sigma, sorted by sigma
    """
    if trials < 1:
        raise InvalidScenarioError(f"trials must be at least 1, got {trials}")
    if any(sigma < 0 for sigma in sigmas):
        raise InvalidScenarioError(f"noise levels must be nonnegative, got {list(sigmas)}")

    rows = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for sigma in sorted(sigmas):
            results = list(pool.map(partial(_run_trial, template, sigma), range(trials)))
            cr, tre, error = (float(np.mean(column)) for column in zip(*results, strict=True))
            logger.info("sigma=%.3f mm: mean CR %.4f, mean TRE %.4f over %d trials", sigma, cr, tre, trials)
            rows.append(SweepRow(sigma=sigma, mean_cr=cr, mean_tre=tre, intrinsic_error=error))
    return rows

