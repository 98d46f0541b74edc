"""Tests for the calibration module."""

import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, "src")

from us_depth_calib.calibration import (
    build_point_matrices,
    enforce_planar_structure,
    fit_residual,
    map_image_to_world,
    solve_intrinsic,
    validate_intrinsic_structure,
)
from us_depth_calib.errors import HomogeneousComponentError, RankDeficientError
from us_depth_calib.metrics import compute_report
from us_depth_calib.models import (
    Calibration,
    ExtrinsicTransform,
    ImagePoint,
    IntrinsicMatrix,
    PointPairSet,
    ScenarioSpec,
)
from us_depth_calib.paper_data import PUBLISHED_INTRINSIC, published_extrinsic, published_intrinsic, published_pairs
from us_depth_calib.simulator import generate_pairs, random_structured_intrinsic, relative_frobenius_error


def _scenario(seed: int, n_points: int = 10, world_noise: float = 0.0) -> ScenarioSpec:
    return ScenarioSpec(
        ground_truth_intrinsic=random_structured_intrinsic(np.random.default_rng(seed)),
        extrinsic=published_extrinsic(),
        n_points=n_points,
        world_noise_sigma=world_noise,
        seed=seed,
    )


def _rotated_extrinsic() -> ExtrinsicTransform:
    angle = 0.4
    array = np.eye(4)
    array[:3, :3] = [[1, 0, 0], [0, np.cos(angle), -np.sin(angle)], [0, np.sin(angle), np.cos(angle)]]
    array[:3, 3] = (12.0, -30.0, 280.0)
    return ExtrinsicTransform.from_array(array)


class TestBuildPointMatrices:
    """Test cases for build_point_matrices."""

    def test_shapes_and_homogeneous_rows(self) -> None:
        """Test that the stacked matrices carry a row of ones."""
        world, pixels = build_point_matrices(published_pairs())
        assert world.shape == (4, 10)
        assert pixels.shape == (3, 10)
        assert np.array_equal(world[3], np.ones(10))
        assert np.array_equal(pixels[2], np.ones(10))
        assert pixels[0, 0] == 88.0 and world[0, 0] == 66.40


class TestSolveIntrinsic:
    """Test cases for solve_intrinsic."""

    @pytest.mark.parametrize("n_points", [3, 4, 10, 50])
    def test_exact_recovery(self, n_points) -> None:
        """Test noiseless pairs recover the ground-truth intrinsic."""
        for seed in range(100):
            pairs, truth = generate_pairs(_scenario(seed, n_points))
            solved = solve_intrinsic(pairs, truth.extrinsic)
            assert relative_frobenius_error(solved.intrinsic.array, truth.intrinsic.array) < 1e-9

    def test_exact_recovery_rotated_extrinsic(self) -> None:
        """Test recovery through an extrinsic with a rotation block."""
        spec = _scenario(7).model_copy(update={"extrinsic": _rotated_extrinsic()})
        pairs, truth = generate_pairs(spec)
        solved = solve_intrinsic(pairs, spec.extrinsic)
        assert np.allclose(solved.intrinsic.array, truth.intrinsic.array, atol=1e-9)

    def test_three_exact_pairs_interpolate(self) -> None:
        """Test three exact pairs leave no residual."""
        pairs, truth = generate_pairs(_scenario(11, n_points=3))
        solved = solve_intrinsic(pairs, truth.extrinsic)
        assert solved.diagnostics is not None
        assert solved.diagnostics.residual_frobenius < 1e-9
        assert solved.diagnostics.rank == 3

    def test_published_pairs_least_squares(self) -> None:
        """Test the fit over all ten published pairs against the printed matrix."""
        solved = solve_intrinsic(published_pairs(), published_extrinsic())
        printed = np.array(PUBLISHED_INTRINSIC)
        assert np.allclose(solved.intrinsic.array[:2, :2], printed[:2, :2], atol=0.02)
        # offsets come out about 1.3 mm from the printed ones
        assert np.allclose(solved.intrinsic.array[:2, 2], printed[:2, 2], atol=2.0)

    def test_published_pairs_structure(self) -> None:
        """Test coplanar published pairs give row 3 = 0 and row 4 = [0, 0, 1]."""
        solved = solve_intrinsic(published_pairs(), published_extrinsic())
        assert np.allclose(solved.intrinsic.array[2], 0.0, atol=1e-9)
        assert np.allclose(solved.intrinsic.array[3], [0.0, 0.0, 1.0], atol=1e-9)

    def test_structure_emerges_on_coplanar_noisy_data(self) -> None:
        """Test noise in x and y only keeps the coplanar structure exact."""
        for seed in range(20):
            pairs, truth = generate_pairs(_scenario(seed, n_points=12))
            rng = np.random.default_rng(100 + seed)
            world = pairs.world_array()
            world[:, :2] += rng.normal(0.0, 1.0, size=(pairs.n, 2))
            noisy = PointPairSet.from_arrays(pairs.pixel_array().tolist(), world.tolist())
            solved = solve_intrinsic(noisy, truth.extrinsic)
            assert np.allclose(solved.intrinsic.array[2], 0.0, atol=1e-9)
            assert np.allclose(solved.intrinsic.array[3], [0.0, 0.0, 1.0], atol=1e-9)

    def test_least_squares_optimality(self) -> None:
        """Test every perturbation of the solution increases the residual."""
        rng = np.random.default_rng(5)
        for seed in range(50):
            spec = _scenario(seed, n_points=15, world_noise=0.5)
            pairs, _ = generate_pairs(spec)
            solved = solve_intrinsic(pairs, spec.extrinsic)
            best = fit_residual(pairs, spec.extrinsic, solved.intrinsic.array)
            assert best == pytest.approx(solved.diagnostics.residual_frobenius)
            for _ in range(20):
                step = rng.normal(size=(4, 3))
                step *= 1e-3 / np.linalg.norm(step)
                assert fit_residual(pairs, spec.extrinsic, solved.intrinsic.array + step) > best

    def test_permutation_invariance(self) -> None:
        """Test that the order of the pairs does not change the solution."""
        pairs, truth = generate_pairs(_scenario(3, n_points=20, world_noise=0.5))
        order = np.random.default_rng(0).permutation(pairs.n) + 1
        shuffled = pairs.subset(order.tolist())
        first = solve_intrinsic(pairs, truth.extrinsic)
        second = solve_intrinsic(shuffled, truth.extrinsic)
        assert np.allclose(first.intrinsic.array, second.intrinsic.array, atol=1e-9)

    def test_collinear_pixels_rejected(self) -> None:
        """Test that collinear pixels raise instead of returning an answer."""
        pixels = [(float(k), 2.0 * k + 5.0) for k in range(10)]
        world = [(k, k, 349.0) for k in range(10)]
        with pytest.raises(RankDeficientError, match="non-collinear") as excinfo:
            solve_intrinsic(PointPairSet.from_arrays(pixels, world), published_extrinsic())
        assert excinfo.value.rank == 2

    def test_repeated_pixel_rejected(self) -> None:
        """Test that one pixel observed many times has rank 1."""
        pairs = PointPairSet.from_arrays([(10.0, 20.0)] * 5, [(1.0, 2.0, 349.0)] * 5)
        with pytest.raises(RankDeficientError) as excinfo:
            solve_intrinsic(pairs, published_extrinsic())
        assert excinfo.value.rank == 1

    def test_too_few_pairs(self) -> None:
        """Test that two pairs cannot determine the intrinsic."""
        pairs = PointPairSet.from_arrays([(0.0, 0.0), (1.0, 5.0)], [(0.0, 0.0, 349.0), (1.0, 1.0, 349.0)])
        with pytest.raises(RankDeficientError):
            solve_intrinsic(pairs, published_extrinsic())

    def test_enforce_planar(self) -> None:
        """Test that the planar option overwrites rows 3 and 4 exactly."""
        spec = _scenario(9, n_points=10, world_noise=1.0)
        pairs, _ = generate_pairs(spec)
        solved = solve_intrinsic(pairs, spec.extrinsic, enforce_planar=True)
        assert np.array_equal(solved.intrinsic.array[2], [0.0, 0.0, 0.0])
        assert np.array_equal(solved.intrinsic.array[3], [0.0, 0.0, 1.0])
        assert solved.diagnostics.residual_frobenius == pytest.approx(
            fit_residual(pairs, spec.extrinsic, solved.intrinsic.array)
        )

    def test_total_is_composition(self) -> None:
        """Test that the total matrix equals extrinsic x intrinsic."""
        solved = solve_intrinsic(published_pairs(), published_extrinsic())
        assert np.allclose(solved.total_array, solved.extrinsic.array @ solved.intrinsic.array)

    def test_deterministic(self) -> None:
        """Test that repeated solves are bit-identical."""
        first = solve_intrinsic(published_pairs(), published_extrinsic())
        second = solve_intrinsic(published_pairs(), published_extrinsic())
        assert first == second


class TestMapImageToWorld:
    """Test cases for map_image_to_world."""

    def test_published_first_row(self) -> None:
        """Test the printed matrices map pixel (88, 234) onto the printed calibrated point."""
        calibration = Calibration.compose(published_extrinsic(), published_intrinsic())
        point = map_image_to_world(calibration, ImagePoint(u=88, v=234))
        assert point.x == pytest.approx(66.488, abs=0.05)
        assert point.y == pytest.approx(59.764, abs=0.05)
        assert point.z == pytest.approx(349.0)

    def test_origin_maps_to_image_offset(self) -> None:
        """Test that pixel (0, 0) maps to the extrinsic applied to the origin column."""
        calibration = Calibration.compose(published_extrinsic(), published_intrinsic())
        point = map_image_to_world(calibration, ImagePoint(u=0, v=0))
        assert point.x == pytest.approx(35.31 - 0.6193)
        assert point.y == pytest.approx(-50.24 + 28.274)

    @pytest.mark.parametrize(
        ("u", "v", "expected"),
        [(5.0, 7.0, (5.0, 7.0, 0.0)), (0.0, 0.0, (0.0, 0.0, 0.0)), (-62.0, 154.0, (-62.0, 154.0, 0.0))],
    )
    def test_identity_mapping(self, u, v, expected) -> None:
        """Test that a unit-scale intrinsic under the identity extrinsic keeps (u, v) and sets z to 0."""
        intrinsic = IntrinsicMatrix(matrix=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0)))
        calibration = Calibration.compose(ExtrinsicTransform.from_array(np.eye(4)), intrinsic)
        point = map_image_to_world(calibration, ImagePoint(u=u, v=v))
        assert point.as_array().tolist() == list(expected)

    @pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
    def test_errors_scale_with_world_frame(self, scale) -> None:
        """Test that scaling pixels-to-mm and the measured points by s scales CR and TRE by s."""
        pairs = published_pairs()
        calibration = Calibration.compose(ExtrinsicTransform.from_array(np.eye(4)), published_intrinsic())
        scaled_intrinsic = np.array(PUBLISHED_INTRINSIC)
        scaled_intrinsic[:3] *= scale
        scaled = Calibration.compose(
            ExtrinsicTransform.from_array(np.eye(4)), IntrinsicMatrix.from_array(scaled_intrinsic)
        )
        scaled_pairs = PointPairSet.from_arrays(pairs.pixel_array(), scale * pairs.world_array())
        report = compute_report(calibration, pairs)
        scaled_report = compute_report(scaled, scaled_pairs)
        assert scaled_report.cr_mm == pytest.approx(scale * report.cr_mm, rel=1e-9)
        assert scaled_report.tre_mm == pytest.approx(scale * report.tre_mm, rel=1e-9)

    def test_corrupt_homogeneous_row(self) -> None:
        """Test that a row 4 other than [0, 0, 1] is reported."""
        array = np.array(PUBLISHED_INTRINSIC)
        array[3] = (0.0, 0.0, 2.0)
        calibration = Calibration.compose(published_extrinsic(), IntrinsicMatrix.from_array(array))
        with pytest.raises(HomogeneousComponentError, match="homogeneous component 2"):
            map_image_to_world(calibration, ImagePoint(u=10, v=10))


class TestIntrinsicStructure:
    """Test cases for validate_intrinsic_structure and enforce_planar_structure."""

    def test_printed_intrinsic_compliant(self) -> None:
        """Test the printed intrinsic has the coplanar structure."""
        report = validate_intrinsic_structure(published_intrinsic())
        assert report.compliant
        assert report.row3_max_abs == 0.0
        assert report.row4_max_deviation == 0.0

    def test_violation_reported(self, caplog) -> None:
        """Test that a deviating row 3 is flagged and logged."""
        array = np.array(PUBLISHED_INTRINSIC)
        array[2] = (0.0, 0.5, 0.0)
        with caplog.at_level("WARNING"):
            report = validate_intrinsic_structure(IntrinsicMatrix.from_array(array), tol_mm=0.1)
        assert not report.compliant
        assert report.row3_max_abs == pytest.approx(0.5)
        assert "structure violated" in caplog.text

    def test_enforce_planar_structure(self) -> None:
        """Test that enforcing the structure keeps rows 1 and 2."""
        array = np.array(PUBLISHED_INTRINSIC)
        array[2] = (0.1, 0.2, 0.3)
        array[3] = (0.01, 0.0, 0.98)
        fixed = enforce_planar_structure(IntrinsicMatrix.from_array(array))
        assert np.array_equal(fixed.array[:2], array[:2])
        assert validate_intrinsic_structure(fixed).row4_max_deviation == 0.0
