"""Tests for the simulator module."""

import json
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, "src")

from us_depth_calib.calibration import solve_intrinsic
from us_depth_calib.errors import DegeneratePixelRangeError, InvalidScenarioError, SegmentOutOfBoundsError
from us_depth_calib.linalg import rank_and_condition
from us_depth_calib.metrics import compute_report
from us_depth_calib.models import ImagePoint, LineSegment2D, PixelRange, ScenarioSpec
from us_depth_calib.paper_data import published_extrinsic
from us_depth_calib.simulator import (
    INTRINSIC_STREAM,
    MASK_STREAM,
    child_rng,
    generate_pairs,
    noise_sweep,
    random_needle_masks,
    random_structured_intrinsic,
    relative_frobenius_error,
    render_needle_mask,
    trial_seed,
    truth_intrinsic_for_seed,
)


@pytest.fixture
def template():
    """Ten-point scenario on the bracket rig."""
    return ScenarioSpec(
        ground_truth_intrinsic=random_structured_intrinsic(np.random.default_rng(0)),
        extrinsic=published_extrinsic(),
        n_points=10,
        seed=42,
    )


class TestGeneratePairs:
    """Test cases for generate_pairs."""

    def test_same_seed_same_pairs(self, template) -> None:
        """Test that a fixed seed reproduces the pairs exactly."""
        first, _ = generate_pairs(template.model_copy(update={"world_noise_sigma": 0.3}))
        second, _ = generate_pairs(template.model_copy(update={"world_noise_sigma": 0.3}))
        assert first == second

    def test_different_seed_different_pairs(self, template) -> None:
        """Test that another seed draws other pixels."""
        first, _ = generate_pairs(template)
        second, _ = generate_pairs(template.model_copy(update={"seed": 43}))
        assert not np.array_equal(first.pixel_array(), second.pixel_array())

    def test_noiseless_pairs_lie_on_truth(self, template) -> None:
        """Test that noiseless world points are the forward map of the pixels."""
        pairs, truth = generate_pairs(template)
        homogeneous = np.vstack([pairs.pixel_array().T, np.ones(pairs.n)])
        assert np.allclose((truth.total_array @ homogeneous)[:3].T, pairs.world_array(), atol=1e-9)

    def test_pixels_within_range(self, template) -> None:
        """Test that pixels are drawn inside the configured rectangle."""
        pairs, _ = generate_pairs(template.model_copy(update={"n_points": 200}))
        pixels = pairs.pixel_array()
        assert pixels[:, 0].min() >= -150 and pixels[:, 0].max() <= 150
        assert pixels[:, 1].min() >= 0 and pixels[:, 1].max() <= 400

    def test_pixels_have_full_rank(self, template) -> None:
        """Test that drawn pixels always span the image plane."""
        for seed in range(50):
            pairs, _ = generate_pairs(template.model_copy(update={"seed": seed, "n_points": 3}))
            homogeneous = np.vstack([pairs.pixel_array().T, np.ones(3)])
            assert rank_and_condition(homogeneous)[0] == 3

    def test_degenerate_range(self, template) -> None:
        """Test that a zero-height pixel range cannot yield rank-3 pixels."""
        spec = template.model_copy(update={"pixel_range": PixelRange(u_min=-10, u_max=10, v_min=5, v_max=5)})
        with pytest.raises(DegeneratePixelRangeError):
            generate_pairs(spec)

    def test_invalid_point_count(self, template) -> None:
        """Test that fewer than three points is refused."""
        with pytest.raises(ValueError):
            ScenarioSpec(
                ground_truth_intrinsic=template.ground_truth_intrinsic, extrinsic=template.extrinsic, n_points=2
            )

    @pytest.mark.slow
    def test_world_noise_monte_carlo(self, template, golden_dir, regen_golden) -> None:
        """Test the median CR of refits under isotropic world noise against the golden result."""
        golden_path = golden_dir / "monte_carlo_cr.json"
        golden = json.loads(golden_path.read_text(encoding="utf-8"))
        case = golden["world_noise_cr"]
        crs = []
        for seed in range(case["seeds"]):
            spec = template.model_copy(
                update={"n_points": case["n_points"], "world_noise_sigma": case["world_noise_sigma"], "seed": seed}
            )
            pairs, _ = generate_pairs(spec)
            crs.append(compute_report(solve_intrinsic(pairs, spec.extrinsic), pairs).cr_mm)
        median = float(np.median(crs))
        if regen_golden:
            case.update({"median_cr_mm": round(median, 9), "tolerance_mm": 1e-6})
            golden["source"] = "measured"
            golden_path.write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")
        assert median == pytest.approx(case["median_cr_mm"], abs=case["tolerance_mm"])

    def test_child_streams_independent(self) -> None:
        """Test that the intrinsic and mask streams differ from the seed's own stream."""
        own = np.random.default_rng(5).uniform(size=4)
        assert not np.allclose(child_rng(5, INTRINSIC_STREAM).uniform(size=4), own)
        assert not np.allclose(child_rng(5, MASK_STREAM).uniform(size=4), own)
        intrinsic_draw = child_rng(5, INTRINSIC_STREAM).uniform(size=4)
        assert not np.allclose(intrinsic_draw, child_rng(5, MASK_STREAM).uniform(size=4))

    def test_truth_intrinsic_for_seed(self) -> None:
        """Test that the ground truth is reproducible and not drawn from the pixel stream."""
        truth = truth_intrinsic_for_seed(3)
        assert truth == truth_intrinsic_for_seed(3)
        assert truth != truth_intrinsic_for_seed(4)
        assert truth != random_structured_intrinsic(np.random.default_rng(3))
        assert np.array_equal(truth.array[3], [0.0, 0.0, 1.0])

    def test_negative_seed_rejected(self) -> None:
        """Test that child streams need a nonnegative seed."""
        with pytest.raises(InvalidScenarioError, match="nonnegative"):
            truth_intrinsic_for_seed(-1)

    def test_structured_intrinsic(self) -> None:
        """Test that random ground truths have the coplanar structure."""
        for seed in range(20):
            array = random_structured_intrinsic(np.random.default_rng(seed)).array
            assert np.array_equal(array[2], [0.0, 0.0, 0.0])
            assert np.array_equal(array[3], [0.0, 0.0, 1.0])
            assert 0.19 < np.linalg.norm(array[:2, 0]) < 0.51


class TestRenderNeedleMask:
    """Test cases for render_needle_mask."""

    def test_horizontal_one_pixel(self) -> None:
        """Test that a one-pixel horizontal needle covers exactly one row."""
        segment = LineSegment2D(a=ImagePoint(u=5.5, v=20.5), b=ImagePoint(u=45.5, v=20.5))
        mask = render_needle_mask(segment, 60, 40, thickness=1)
        rows, cols = np.nonzero(mask.bits)
        assert set(rows.tolist()) == {20}
        assert cols.min() == 5 and cols.max() == 45

    def test_point_symmetry(self) -> None:
        """Test that the rendering is symmetric under a half-turn about the segment midpoint."""
        segment = LineSegment2D(a=ImagePoint(u=10.5, v=10.5), b=ImagePoint(u=50.5, v=30.5))
        mask = render_needle_mask(segment, 80, 60, thickness=3)
        window = mask.bits[0:41, 0:61]
        assert np.array_equal(window, window[::-1, ::-1])
        assert mask.bits[20, 30]

    def test_thickness_grows_mask(self) -> None:
        """Test that a thicker needle sets more pixels."""
        segment = LineSegment2D(a=ImagePoint(u=10, v=10), b=ImagePoint(u=60, v=40))
        thin = render_needle_mask(segment, 80, 60, thickness=1)
        thick = render_needle_mask(segment, 80, 60, thickness=5)
        assert thick.foreground_count > 3 * thin.foreground_count
        assert np.all(thick.bits[thin.bits])

    def test_out_of_bounds(self) -> None:
        """Test that an endpoint outside the image is rejected."""
        segment = LineSegment2D(a=ImagePoint(u=10, v=10), b=ImagePoint(u=90, v=10))
        with pytest.raises(SegmentOutOfBoundsError):
            render_needle_mask(segment, 80, 60, thickness=1)

    def test_thin_needle_rejected(self) -> None:
        """Test that a thickness below one pixel is rejected."""
        segment = LineSegment2D(a=ImagePoint(u=10, v=10), b=ImagePoint(u=50, v=10))
        with pytest.raises(InvalidScenarioError):
            render_needle_mask(segment, 80, 60, thickness=0.5)

    def test_random_masks_reproducible(self) -> None:
        """Test that random needles are reproducible from the seed."""
        first = random_needle_masks(seed=9, count=3, width=100, height=100)
        second = random_needle_masks(seed=9, count=3, width=100, height=100)
        for (seg_a, t_a, mask_a), (seg_b, t_b, mask_b) in zip(first, second, strict=True):
            assert seg_a == seg_b and t_a == t_b
            assert np.array_equal(mask_a.bits, mask_b.bits)

    def test_random_masks_image_too_small(self) -> None:
        """Test that a 40-pixel needle cannot be placed in a tiny image."""
        with pytest.raises(InvalidScenarioError):
            random_needle_masks(seed=0, count=1, width=30, height=30)


class TestNoiseSweep:
    """Test cases for noise_sweep."""

    def test_trial_seed_stable(self) -> None:
        """Test that trial seeds depend only on (seed, trial)."""
        assert trial_seed(42, 3) == trial_seed(42, 3)
        assert trial_seed(42, 3) != trial_seed(42, 4)
        assert 0 <= trial_seed(42, 3) < 2**63

    def test_noiseless_row_is_exact(self, template) -> None:
        """Test that sigma 0 gives zero CR, TRE and intrinsic error."""
        (row,) = noise_sweep(template, [0.0], trials=10)
        assert row.mean_cr == pytest.approx(0.0, abs=1e-9)
        assert row.mean_tre == pytest.approx(0.0, abs=1e-9)
        assert row.intrinsic_error < 1e-9

    def test_schedule_independent(self, template) -> None:
        """Test that the thread count does not change the results."""
        serial = noise_sweep(template, [0.5, 0.25], trials=12, workers=1)
        parallel = noise_sweep(template, [0.25, 0.5], trials=12, workers=4)
        assert serial == parallel
        assert [row.sigma for row in serial] == [0.25, 0.5]

    def test_common_random_numbers(self, template) -> None:
        """Test that CR scales linearly with sigma when trials share their streams."""
        low, high = noise_sweep(template, [0.25, 0.5], trials=8)
        assert high.mean_cr == pytest.approx(2.0 * low.mean_cr, rel=1e-9)

    @pytest.mark.slow
    def test_monotone_in_sigma(self, template) -> None:
        """Test that mean CR does not decrease as the world noise grows."""
        rows = noise_sweep(template, [0.0, 0.25, 0.5, 1.0], trials=200, workers=4)
        assert rows[0].mean_cr == pytest.approx(0.0, abs=1e-9)
        assert rows[0].mean_tre == pytest.approx(0.0, abs=1e-9)
        for lower, upper in zip(rows, rows[1:]):
            assert upper.mean_cr >= 0.95 * lower.mean_cr
            assert upper.mean_cr <= upper.mean_tre

    def test_invalid_arguments(self, template) -> None:
        """Test that nonpositive trial counts and negative sigmas are refused."""
        with pytest.raises(InvalidScenarioError):
            noise_sweep(template, [0.1], trials=0)
        with pytest.raises(InvalidScenarioError):
            noise_sweep(template, [-0.1], trials=1)

    def test_relative_frobenius_error(self) -> None:
        """Test the relative error of a scaled matrix."""
        truth = np.ones((4, 3))
        assert relative_frobenius_error(1.1 * truth, truth) == pytest.approx(0.1)
