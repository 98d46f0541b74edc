"""Readers and writers for point pair CSV, transform JSON, mask PGM and report CSV files.

Numbers are written with six decimals and LF line endings, so a file read and
written again is byte-identical. Transform entries keep twelve significant digits.
"""

import csv
import io
import json
import logging
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from .errors import MalformedCsvError, MalformedPgmError, MalformedTransformError, MissingFileError
from .models import (
    BinaryMask,
    ErrorReport,
    ExtrinsicTransform,
    ImagePoint,
    IntrinsicMatrix,
    LineSegment2D,
    PairFileRecord,
    PointPair,
    PointPairSet,
    SweepRow,
    TransformFile,
    TransformKind,
    WorldPoint,
)

logger = logging.getLogger(__name__)

PAIR_HEADER = ("u", "v", "x", "y", "z")
PIXEL_HEADER = ("u", "v")
REPORT_HEADER = ("No", "u", "v", "x", "y", "z", "cal_x", "cal_y", "cal_z", "error_mm")
SWEEP_HEADER = ("sigma", "mean_cr", "mean_tre", "intrinsic_error")
SEGMENT_HEADER = ("file", "a_u", "a_v", "b_u", "b_v", "thickness")

TRANSFORM_DIGITS = 12


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _require_file(path: Path) -> None:
    if not path.is_file():
        raise MissingFileError(f"{path}: no such file")


def _read_text(path: Path) -> str:
    _require_file(path)
    with open(path, encoding="utf-8", newline="") as f:
        return f.read()


def _csv_text(rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.debug("Wrote %s", path)


def _parse_rows(path: Path, header: Sequence[str]) -> list[tuple[int, list[float]]]:
    """Parse a numeric CSV with a mandatory header into (line number, values) rows."""
    text = _read_text(path)
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise MalformedCsvError(str(path), f"empty file, expected header {','.join(header)}", line=1) from None
    if [cell.strip() for cell in first] != list(header):
        raise MalformedCsvError(str(path), f"expected header {','.join(header)}, got {','.join(first)}", line=1)

    rows = []
    for cells in reader:
        line = reader.line_num
        if not cells or all(not cell.strip() for cell in cells):
            continue
        if len(cells) != len(header):
            raise MalformedCsvError(str(path), f"expected {len(header)} fields, got {len(cells)}", line=line)
        try:
            values = [float(cell) for cell in cells]
        except ValueError as e:
            raise MalformedCsvError(str(path), f"not a number: {e}", line=line) from e
        if not all(math.isfinite(value) for value in values):
            raise MalformedCsvError(str(path), "values must be finite", line=line)
        rows.append((line, values))
    return rows


def read_pairs_csv(path: Path) -> PointPairSet:
    """Read a ``u,v,x,y,z`` CSV; records are numbered from 1 in file order.

    Raises:
        MissingFileError: If the file does not exist
        MalformedCsvError: With the offending line number
    """
    path = Path(path)
    pairs = []
    for number, (line, values) in enumerate(_parse_rows(path, PAIR_HEADER), start=1):
        try:
            record = PairFileRecord(**dict(zip(PAIR_HEADER, values, strict=True)))
        except ValidationError as e:
            raise MalformedCsvError(str(path), e.errors()[0]["msg"], line=line) from e
        pairs.append(
            PointPair(
                index=number,
                image=ImagePoint(u=record.u, v=record.v),
                world=WorldPoint(x=record.x, y=record.y, z=record.z),
            )
        )
    logger.debug("Read %d point pairs from %s", len(pairs), path)
    return PointPairSet(pairs=tuple(pairs))


def format_pairs_csv(pixels: Sequence[ImagePoint], world: Sequence[WorldPoint]) -> str:
    rows = [PAIR_HEADER]
    rows.extend(
        (_fmt(p.u), _fmt(p.v), _fmt(w.x), _fmt(w.y), _fmt(w.z)) for p, w in zip(pixels, world, strict=True)
    )
    return _csv_text(rows)


def write_pairs_csv(path: Path, pairs: PointPairSet) -> None:
    _write_text(
        Path(path),
        format_pairs_csv([pair.image for pair in pairs.pairs], [pair.world for pair in pairs.pairs]),
    )


def read_pixels_csv(path: Path) -> list[ImagePoint]:
    """Read a ``u,v`` CSV of pixels to map."""
    return [ImagePoint(u=values[0], v=values[1]) for _, values in _parse_rows(Path(path), PIXEL_HEADER)]


def _read_transform_file(path: Path, kind: TransformKind) -> NDArray[np.float64]:
    path = Path(path)
    text = _read_text(path)
    try:
        transform = TransformFile.model_validate_json(text)
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise MalformedTransformError(str(path), f"{location}: {error['msg']}" if location else error["msg"]) from e
    if transform.kind != kind:
        raise MalformedTransformError(str(path), f"expected kind {kind.value!r}, got {transform.kind.value!r}")
    return transform.as_array()


def read_extrinsic(path: Path) -> ExtrinsicTransform:
    """Read a 4x4 rigid transform file.

    Raises:
        MalformedTransformError: If the file is not a rigid 4x4 extrinsic transform
    """
    array = _read_transform_file(path, TransformKind.EXTRINSIC)
    try:
        return ExtrinsicTransform.from_array(array)
    except ValidationError as e:
        raise MalformedTransformError(str(path), e.errors()[0]["msg"]) from e


def read_intrinsic(path: Path) -> IntrinsicMatrix:
    return IntrinsicMatrix.from_array(_read_transform_file(path, TransformKind.INTRINSIC))


def read_total(path: Path) -> NDArray[np.float64]:
    return _read_transform_file(path, TransformKind.TOTAL)


def write_transform(path: Path, kind: TransformKind, array: NDArray[np.float64]) -> None:
    """Write a transform as ``{kind, rows, cols, entries}`` JSON."""
    matrix = np.asarray(array, dtype=np.float64)
    entries = [float(f"{value:.{TRANSFORM_DIGITS}g}") + 0.0 for value in matrix.reshape(-1)]
    transform = TransformFile(kind=kind, rows=matrix.shape[0], cols=matrix.shape[1], entries=entries)
    _write_text(Path(path), json.dumps(transform.model_dump(mode="json"), indent=2) + "\n")


def format_error_report(report: ErrorReport) -> str:
    """Per-point rows in record order, then CR and TRE footer rows."""
    rows: list[Sequence[str]] = [REPORT_HEADER]
    for entry in report.per_point:
        rows.append(
            (
                str(entry.index),
                _fmt(entry.image.u),
                _fmt(entry.image.v),
                _fmt(entry.measured.x),
                _fmt(entry.measured.y),
                _fmt(entry.measured.z),
                _fmt(entry.predicted.x),
                _fmt(entry.predicted.y),
                _fmt(entry.predicted.z),
                _fmt(entry.error_mm),
            )
        )
    padding = [""] * (len(REPORT_HEADER) - 2)
    rows.append(["CR", *padding, _fmt(report.cr_mm)])
    rows.append(["TRE", *padding, _fmt(report.tre_mm)])
    return _csv_text(rows)


def write_error_report(path: Path, report: ErrorReport) -> None:
    _write_text(Path(path), format_error_report(report))


def write_sweep_csv(path: Path, rows: Sequence[SweepRow]) -> None:
    lines: list[Sequence[str]] = [SWEEP_HEADER]
    lines.extend(
        (_fmt(row.sigma), _fmt(row.mean_cr), _fmt(row.mean_tre), f"{row.intrinsic_error:.6e}") for row in rows
    )
    _write_text(Path(path), _csv_text(lines))


def write_segments_csv(path: Path, segments: Sequence[tuple[str, LineSegment2D, float]]) -> None:
    """Write the true endpoints of rendered masks as ``file,a_u,a_v,b_u,b_v,thickness``."""
    lines: list[Sequence[str]] = [SEGMENT_HEADER]
    lines.extend(
        (name, _fmt(seg.a.u), _fmt(seg.a.v), _fmt(seg.b.u), _fmt(seg.b.v), _fmt(thickness))
        for name, seg, thickness in segments
    )
    _write_text(Path(path), _csv_text(lines))


def read_mask_pgm(path: Path) -> BinaryMask:
    """Read a needle mask from a P4 (set bit = needle) or P2 (nonzero = needle) file.

    Raises:
        MissingFileError: If the file does not exist
        MalformedPgmError: If the file is not a readable P2 or P4 image
    """
    path = Path(path)
    _require_file(path)
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic not in (b"P2", b"P4"):
        raise MalformedPgmError(str(path), f"expected a P2 or P4 header, got {magic!r}")
    try:
        with Image.open(path) as image:
            image.load()
            pixels = np.asarray(image)
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as e:
        raise MalformedPgmError(str(path), f"cannot decode image: {e}") from e

    # mode "1" decodes a set PBM bit as black, i.e. False
    bits = ~pixels.astype(bool) if magic == b"P4" else pixels != 0
    try:
        mask = BinaryMask(bits=bits)
    except ValidationError as e:
        raise MalformedPgmError(str(path), e.errors()[0]["msg"]) from e
    logger.debug("Read %dx%d mask with %d needle pixels from %s", mask.width, mask.height, mask.foreground_count, path)
    return mask


def write_mask_pgm(path: Path, mask: BinaryMask) -> None:
    """Write a mask as binary P4, needle pixels as set bits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(~mask.bits).save(path, format="PPM")
    logger.debug("Wrote mask %s", path)
