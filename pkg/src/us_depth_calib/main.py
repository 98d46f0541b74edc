"""Command-line interface of the ultrasound calibration toolkit."""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError

from . import __version__
from .calibration import map_image_to_world, solve_intrinsic, validate_intrinsic_structure
from .config import CalibrationSettings, ConfigManager
from .errors import CalibrationError, ExitCode, InvalidScenarioError, UsageError
from .file_formats import (
    format_error_report,
    format_pairs_csv,
    read_extrinsic,
    read_intrinsic,
    read_mask_pgm,
    read_pairs_csv,
    read_pixels_csv,
    write_error_report,
    write_mask_pgm,
    write_pairs_csv,
    write_segments_csv,
    write_sweep_csv,
    write_transform,
)
from .metrics import compute_report, point_error
from .models import (
    Calibration,
    ImagePoint,
    LineFitMethod,
    PinholeIntrinsics,
    PixelRange,
    ScenarioSpec,
    TransformKind,
)
from .needle import back_project_depth, fit_needle_line, select_tip
from .paper_data import (
    LITERATURE_BASELINES,
    PUBLISHED_CR_MM,
    PUBLISHED_TRE_MM,
    published_extrinsic,
    published_report,
    reproduce_published_rows,
)
from .simulator import generate_pairs, noise_sweep, random_needle_masks, truth_intrinsic_for_seed

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors on one ``E_USAGE:`` line and exits with code 2."""

    def error(self, message: str) -> NoReturn:
        print(f"{UsageError.code}: {self.prog}: {message}", file=sys.stderr)
        sys.exit(ExitCode.USAGE)


def _index_list(text: str) -> list[int]:
    try:
        indices = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated record numbers, got {text!r}") from None
    if not indices or min(indices) < 1:
        raise argparse.ArgumentTypeError(f"record numbers start at 1, got {text!r}")
    return indices


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fmt_point(x: float, y: float, z: float) -> str:
    return f"{x:.4f} {y:.4f} {z:.4f}"


def cmd_calibrate(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Solve the intrinsic matrix and write intrinsic.json and total.json."""
    pairs = read_pairs_csv(args.pairs)
    extrinsic = read_extrinsic(args.extrinsic)

    if args.fit_indices:
        try:
            fit_pairs = pairs.subset(args.fit_indices)
        except ValueError as e:
            raise UsageError(str(e)) from e
        holdout = pairs.complement(args.fit_indices)
    else:
        fit_pairs, holdout = pairs, pairs.complement([])

    calibration = solve_intrinsic(fit_pairs, extrinsic, settings.rank_tol, settings.enforce_planar)
    structure = validate_intrinsic_structure(calibration.intrinsic, settings.structure_tol_mm)
    eval_pairs = holdout if args.fit_indices and holdout.n > 0 else pairs
    report = compute_report(calibration, eval_pairs, settings.homogeneous_tol)

    diagnostics = calibration.diagnostics
    assert diagnostics is not None
    print(f"pairs: {pairs.n} (fit {fit_pairs.n})")
    print(f"rank: {diagnostics.rank}")
    print(f"condition: {diagnostics.condition:.6e}")
    print(f"residual_frobenius: {diagnostics.residual_frobenius:.6e}")
    print(
        f"structure: {'ok' if structure.compliant else 'VIOLATED'} "
        f"(row 3 max {structure.row3_max_abs:.6f}, row 4 deviation {structure.row4_max_deviation:.6f}, "
        f"tol {structure.tol_mm:g})"
    )
    spacing_u, spacing_v = calibration.intrinsic.pixel_spacing_mm
    origin = calibration.intrinsic.origin
    print(f"pixel_spacing: u {spacing_u:.4f} v {spacing_v:.4f} mm/px")
    print(f"image_origin: {origin[0]:.4f} {origin[1]:.4f} {origin[2]:.4f} mm")
    scope = "holdout" if eval_pairs is holdout else "all"
    print(f"evaluated: {scope} {report.n}")
    print(f"CR: {report.cr_mm:.4f} mm")
    print(f"TRE: {report.tre_mm:.4f} mm")

    out_dir = Path(args.out_dir)
    for kind, array in (
        (TransformKind.INTRINSIC, calibration.intrinsic.array),
        (TransformKind.TOTAL, calibration.total_array),
    ):
        path = out_dir / f"{kind.value}.json"
        write_transform(path, kind, array)
        print(f"wrote: {path}")
    return ExitCode.SUCCESS


def cmd_apply(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Map pixels into the depth-camera frame and print a u,v,x,y,z CSV."""
    pixels = [ImagePoint(u=u, v=v) for u, v in args.pixel or []]
    if args.pixels_file:
        pixels.extend(read_pixels_csv(args.pixels_file))
    if not pixels:
        raise UsageError("give at least one --pixel or a --pixels-file")

    calibration = Calibration.compose(read_extrinsic(args.extrinsic), read_intrinsic(args.intrinsic))
    world = [map_image_to_world(calibration, pixel, settings.homogeneous_tol) for pixel in pixels]
    sys.stdout.write(format_pairs_csv(pixels, world))
    return ExitCode.SUCCESS


def cmd_evaluate(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Write the per-point error report; optionally plot the residuals."""
    pairs = read_pairs_csv(args.pairs)
    calibration = Calibration.compose(read_extrinsic(args.extrinsic), read_intrinsic(args.intrinsic))
    report = compute_report(calibration, pairs, settings.homogeneous_tol)

    if args.out:
        write_error_report(args.out, report)
        print(f"CR: {report.cr_mm:.4f} mm")
        print(f"TRE: {report.tre_mm:.4f} mm")
        print(f"wrote: {args.out}")
    else:
        sys.stdout.write(format_error_report(report))

    if args.svg:
        from .plots import write_residual_svg

        write_residual_svg(args.svg, report)
        if args.out:
            print(f"wrote: {args.svg}")
    return ExitCode.SUCCESS


def cmd_locate_tip(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Fit the needle in a mask, pick the tip and optionally carry it into the depth-camera frame."""
    if (args.intrinsic is None) != (args.extrinsic is None):
        raise UsageError("--intrinsic and --extrinsic must be given together")
    camera_args = (args.marker_pixel, args.fx, args.fy, args.cx, args.cy)
    if args.depth is not None and any(value is None for value in camera_args):
        raise UsageError("--depth needs --marker-pixel, --fx, --fy, --cx and --cy")

    mask = read_mask_pgm(args.mask)
    segment = fit_needle_line(
        mask,
        min_pixels=settings.min_pixels,
        method=settings.line_fit_method,
        ransac_threshold_px=settings.ransac_threshold_px,
        ransac_iterations=settings.ransac_iterations,
        ransac_seed=settings.ransac_seed,
        cap_compensation=settings.cap_compensation,
    )
    tip = select_tip(segment, args.direction)
    print(f"segment: {segment.a.u:.4f} {segment.a.v:.4f} {segment.b.u:.4f} {segment.b.v:.4f}")
    print(f"tip: {tip.u:.4f} {tip.v:.4f}")

    mapped = None
    if args.intrinsic is not None:
        calibration = Calibration.compose(read_extrinsic(args.extrinsic), read_intrinsic(args.intrinsic))
        mapped = map_image_to_world(calibration, tip, settings.homogeneous_tol)
        print(f"mapped: {_fmt_point(mapped.x, mapped.y, mapped.z)}")

    if args.depth is not None:
        try:
            camera = PinholeIntrinsics(fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy)
        except ValidationError as e:
            raise UsageError(f"invalid camera intrinsics: {e.errors()[0]['msg']}") from e
        world = back_project_depth(args.marker_pixel, args.depth, camera)
        print(f"world: {_fmt_point(world.x, world.y, world.z)}")
        if mapped is not None:
            print(f"discrepancy_mm: {point_error(mapped, world):.4f}")
    return ExitCode.SUCCESS


def cmd_simulate(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Generate a synthetic calibration scene and write its files."""
    if args.n_points < 3:
        raise InvalidScenarioError(f"--n-points must be at least 3, got {args.n_points}")
    if args.seed < 0:
        raise InvalidScenarioError(f"--seed must be nonnegative, got {args.seed}")
    extrinsic = read_extrinsic(args.extrinsic) if args.extrinsic else published_extrinsic()
    truth_intrinsic = truth_intrinsic_for_seed(args.seed)
    try:
        spec = ScenarioSpec(
            ground_truth_intrinsic=truth_intrinsic,
            extrinsic=extrinsic,
            n_points=args.n_points,
            pixel_noise_sigma=args.pixel_noise,
            world_noise_sigma=args.world_noise,
            pixel_range=PixelRange(
                u_min=args.u_range[0], u_max=args.u_range[1], v_min=args.v_range[0], v_max=args.v_range[1]
            ),
            seed=args.seed,
        )
    except ValidationError as e:
        error = e.errors()[0]
        raise InvalidScenarioError(f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}") from e

    out_dir = Path(args.out_dir)
    pairs, truth = generate_pairs(spec)
    written = [out_dir / "pairs.csv", out_dir / "extrinsic.json", out_dir / "intrinsic.json", out_dir / "total.json"]
    write_pairs_csv(written[0], pairs)
    write_transform(written[1], TransformKind.EXTRINSIC, truth.extrinsic.array)
    write_transform(written[2], TransformKind.INTRINSIC, truth.intrinsic.array)
    write_transform(written[3], TransformKind.TOTAL, truth.total_array)

    if args.masks:
        segments = []
        for k, (segment, thickness, mask) in enumerate(
            random_needle_masks(args.seed, args.masks, args.mask_width, args.mask_height)
        ):
            name = f"mask_{k:03d}.pgm"
            write_mask_pgm(out_dir / "masks" / name, mask)
            segments.append((name, segment, thickness))
        write_segments_csv(out_dir / "masks" / "segments.csv", segments)
        written.append(out_dir / "masks" / "segments.csv")

    if args.sweep:
        rows = noise_sweep(spec, args.sweep, args.trials, args.workers)
        write_sweep_csv(out_dir / "sweep.csv", rows)
        written.append(out_dir / "sweep.csv")
        for row in rows:
            print(
                f"sigma {row.sigma:.4f}: CR {row.mean_cr:.4f} TRE {row.mean_tre:.4f} "
                f"intrinsic {row.intrinsic_error:.3e}"
            )

    for path in written:
        print(f"wrote: {path}")
    return ExitCode.SUCCESS


def cmd_reproduce_paper(args: argparse.Namespace, settings: CalibrationSettings) -> int:
    """Print the published table recomputed from the printed matrices and the method comparison."""
    print("Published calibration, recomputed from the printed matrices")
    print(
        f"{'No':>3} {'u':>6} {'v':>6} {'x':>8} {'y':>8} {'z':>8} "
        f"{'pub_x':>8} {'pub_y':>8} {'calc_x':>8} {'calc_y':>8} {'pub_err':>7} {'calc_err':>8}"
    )
    inconsistent = []
    for item in reproduce_published_rows():
        row = item.row
        flag = "" if item.consistent else f"  inconsistent ({item.discrepancy_mm:.3f} mm)"
        if not item.consistent:
            inconsistent.append(row.no)
        print(
            f"{row.no:>3} {row.u:>6.0f} {row.v:>6.0f} {row.measured[0]:>8.2f} {row.measured[1]:>8.2f} "
            f"{row.measured[2]:>8.2f} {row.calibrated[0]:>8.3f} {row.calibrated[1]:>8.3f} "
            f"{item.recomputed.x:>8.3f} {item.recomputed.y:>8.3f} {row.error_mm:>7.4f} "
            f"{item.recomputed_error_mm:>8.4f}{flag}"
        )

    report = published_report()
    print(f"CR: {report.cr_mm:.4f} mm (published {PUBLISHED_CR_MM:.4f})")
    print(f"TRE: {report.tre_mm:.4f} mm (published {PUBLISHED_TRE_MM:.4f})")
    if inconsistent:
        print(f"rows not reproduced by the printed matrices: {', '.join(str(no) for no in inconsistent)}")

    print()
    print("Comparison with other calibration methods (literature values)")
    for baseline in LITERATURE_BASELINES:
        print(f"{baseline.name}: CR {baseline.cr_mm:.2f} TRE {baseline.tre_mm:.2f}")
    print(f"proposed: CR {report.cr_mm:.2f} TRE {report.tre_mm:.2f}")
    return ExitCode.SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="us-depth-calib",
        description="Ultrasound image calibration with a depth camera",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="JSON settings file")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--rank-tol", type=float, help="Relative singular value cutoff")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    calibrate = subparsers.add_parser("calibrate", help="Solve the intrinsic matrix from point pairs")
    calibrate.add_argument("--pairs", type=Path, required=True, help="u,v,x,y,z CSV")
    calibrate.add_argument("--extrinsic", type=Path, required=True, help="Extrinsic transform JSON")
    calibrate.add_argument("--fit-indices", type=_index_list, help="Records to fit on, e.g. 1,3,4; others are held out")
    calibrate.add_argument("--enforce-planar", action="store_true", default=None, help="Force coplanar structure")
    calibrate.add_argument("--out-dir", type=Path, default=Path("."), help="Output directory")
    calibrate.set_defaults(handler=cmd_calibrate)

    apply = subparsers.add_parser("apply", help="Map US pixels into the depth-camera frame")
    apply.add_argument("--intrinsic", type=Path, required=True)
    apply.add_argument("--extrinsic", type=Path, required=True)
    apply.add_argument("--pixel", type=float, nargs=2, action="append", metavar=("U", "V"))
    apply.add_argument("--pixels-file", type=Path, help="u,v CSV")
    apply.set_defaults(handler=cmd_apply)

    evaluate = subparsers.add_parser("evaluate", help="Per-point errors, CR and TRE of a calibration")
    evaluate.add_argument("--pairs", type=Path, required=True)
    evaluate.add_argument("--intrinsic", type=Path, required=True)
    evaluate.add_argument("--extrinsic", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, help="Report CSV (stdout when omitted)")
    evaluate.add_argument("--svg", type=Path, help="Residual scatter plot")
    evaluate.set_defaults(handler=cmd_evaluate)

    locate = subparsers.add_parser("locate-tip", help="Find the needle tip in a segmentation mask")
    locate.add_argument("--mask", type=Path, required=True, help="P2 or P4 PGM mask")
    locate.add_argument("--direction", type=float, nargs=2, required=True, metavar=("DU", "DV"))
    locate.add_argument("--ransac", action="store_true", help="Fit the line on RANSAC inliers")
    locate.add_argument("--intrinsic", type=Path)
    locate.add_argument("--extrinsic", type=Path)
    locate.add_argument("--depth", type=float, help="Depth of the marker pixel, mm")
    locate.add_argument("--marker-pixel", type=float, nargs=2, metavar=("U", "V"))
    for name in ("fx", "fy", "cx", "cy"):
        locate.add_argument(f"--{name}", type=float)
    locate.set_defaults(handler=cmd_locate_tip)

    simulate = subparsers.add_parser("simulate", help="Write a synthetic calibration scene")
    simulate.add_argument("--out-dir", type=Path, required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--n-points", type=int, default=10)
    simulate.add_argument("--pixel-noise", type=float, default=0.0, help="Pixel noise sigma")
    simulate.add_argument("--world-noise", type=float, default=0.0, help="World noise sigma, mm")
    simulate.add_argument("--u-range", type=float, nargs=2, default=(-150.0, 150.0), metavar=("MIN", "MAX"))
    simulate.add_argument("--v-range", type=float, nargs=2, default=(0.0, 400.0), metavar=("MIN", "MAX"))
    simulate.add_argument("--extrinsic", type=Path, help="Rig transform (bracket offsets when omitted)")
    simulate.add_argument("--masks", type=int, default=0, help="Number of needle masks to render")
    simulate.add_argument("--mask-width", type=int, default=256)
    simulate.add_argument("--mask-height", type=int, default=256)
    simulate.add_argument("--sweep", type=_float_list, help="World noise levels, e.g. 0,0.25,0.5,1")
    simulate.add_argument("--trials", type=int, default=200)
    simulate.add_argument("--workers", type=int, default=1)
    simulate.set_defaults(handler=cmd_simulate)

    reproduce = subparsers.add_parser("reproduce-paper", help="Recompute the published calibration results")
    reproduce.set_defaults(handler=cmd_reproduce_paper)
    return parser


def _load_settings(args: argparse.Namespace) -> CalibrationSettings:
    overrides = {
        "rank_tol": args.rank_tol,
        "enforce_planar": getattr(args, "enforce_planar", None),
        "line_fit_method": LineFitMethod.RANSAC if getattr(args, "ransac", False) else None,
    }
    if args.config is None:
        return CalibrationSettings(**{key: value for key, value in overrides.items() if value is not None})
    return ConfigManager(args.config).load_config(overrides)


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        settings = _load_settings(args)
        return int(args.handler(args, settings))
    except CalibrationError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(e.cli_line(), file=sys.stderr)
        return int(e.exit_code)
    except ValidationError as e:
        print(f"{UsageError.code}: {e.errors()[0]['msg']}", file=sys.stderr)
        return int(ExitCode.USAGE)


if __name__ == "__main__":
    sys.exit(main())
