"""File formats: clouds, series, diagrams, density grids and reports.

Every float is written with 17 significant digits.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel

from crosspers.models.cloud import PointCloud, TimeSeries
from crosspers.persistence import PersistenceDiagram
from crosspers.stats import ScalarDensity, SweepTable
from crosspers.summaries import DensityGrid, GridSpec
from crosspers.utils import format_float

logger = logging.getLogger(__name__)


class CloudFormatError(ValueError):
    def __init__(self, path: Path, lineno: int, message: str) -> None:
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def _parse_rows(file: Path, min_columns: int = 1) -> list[tuple[int, list[str]]]:
    if not file.exists():
        raise FileNotFoundError(f"file {file} does not exist")
    rows = []
    for lineno, line in enumerate(file.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [field.strip() for field in line.split(",")]
        if len(fields) < min_columns:
            raise CloudFormatError(file, lineno, f"expected {min_columns} columns")
        rows.append((lineno, fields))
    if not rows:
        raise CloudFormatError(file, 1, "file contains no data")
    return rows


def _to_float(file: Path, lineno: int, value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise CloudFormatError(file, lineno, f"invalid number {value!r}") from None
    if not np.isfinite(number):
        raise CloudFormatError(file, lineno, f"non-finite number {value!r}")
    return number


def read_cloud(file: Path) -> PointCloud:
    """One point per row, comma separated, no header.

    Raises:
        CloudFormatError: On malformed rows, with the offending line number.
    """
    rows = _parse_rows(file)
    dim = len(rows[0][1])
    points = []
    for lineno, fields in rows:
        if len(fields) != dim:
            raise CloudFormatError(
                file, lineno, f"expected {dim} coordinates, got {len(fields)}"
            )
        points.append([_to_float(file, lineno, value) for value in fields])
    logger.debug("read %d points of dimension %d from %s", len(points), dim, file)
    return PointCloud(np.array(points))


def write_cloud(file: Path, cloud: PointCloud) -> None:
    file.write_text(
        "".join(",".join(map(format_float, row)) + "\n" for row in cloud.points)
    )


def read_series(file: Path) -> TimeSeries:
    """Single-column series."""
    values = []
    for lineno, fields in _parse_rows(file):
        if len(fields) != 1:
            raise CloudFormatError(file, lineno, "series files have a single column")
        values.append(_to_float(file, lineno, fields[0]))
    return TimeSeries(np.array(values), label=file.stem)


def read_labelled_series(file: Path) -> tuple[list[TimeSeries], np.ndarray]:
    """One series per row, the integer label in the first column."""
    series, labels = [], []
    for lineno, fields in _parse_rows(file, min_columns=3):
        try:
            label = int(fields[0])
        except ValueError:
            raise CloudFormatError(file, lineno, f"invalid label {fields[0]!r}") from None
        values = [_to_float(file, lineno, value) for value in fields[1:]]
        series.append(TimeSeries(np.array(values), label=str(label)))
        labels.append(label)
    return series, np.array(labels)


def write_labelled_series(
    file: Path, series: Sequence[TimeSeries], labels: Sequence[int]
) -> None:
    file.write_text(
        "".join(
            f"{int(label)}," + ",".join(map(format_float, s.values)) + "\n"
            for s, label in zip(series, labels, strict=True)
        )
    )


def write_diagrams(file: Path, diagrams: Sequence[PersistenceDiagram]) -> None:
    lines = ["dim,birth,death\n"]
    for diagram in diagrams:
        lines.extend(
            f"{diagram.dim},{format_float(birth)},{format_float(death)}\n"
            for birth, death in diagram.pairs
        )
    file.write_text("".join(lines))


def read_diagrams(file: Path) -> dict[int, PersistenceDiagram]:
    pairs: dict[int, list[tuple[float, float]]] = {}
    for lineno, fields in _parse_rows(file, min_columns=3):
        if fields[0] == "dim":
            continue
        try:
            dim = int(fields[0])
            birth, death = float(fields[1]), float(fields[2])
        except ValueError:
            raise CloudFormatError(file, lineno, "invalid diagram row") from None
        pairs.setdefault(dim, []).append((birth, death))
    return {dim: PersistenceDiagram.from_pairs(dim, p) for dim, p in sorted(pairs.items())}


def write_grid(file: Path, grid: DensityGrid) -> Path:
    """Row-major CSV of the values and a JSON sidecar next to it.

    Returns:
        Path: The sidecar path.
    """
    file.write_text(
        "".join(",".join(map(format_float, row)) + "\n" for row in grid.values)
    )
    sidecar = file.with_suffix(".json")
    sidecar.write_text(json.dumps(grid.sidecar(), indent=2))
    return sidecar


def read_grid(file: Path) -> DensityGrid:
    meta = json.loads(file.with_suffix(".json").read_text())
    x_min, x_max, y_min, y_max = meta["bounds"]
    nx, ny = meta["resolution"]
    spec = GridSpec(x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max, nx=nx, ny=ny)
    values = np.array(
        [[_to_float(file, lineno, v) for v in fields] for lineno, fields in _parse_rows(file)]
    )
    return DensityGrid(
        spec=spec,
        values=values,
        normalized=meta["normalized"],
        bandwidth=meta["bandwidth"],
        weighting=meta["weighting"],
    )


def pgm_bytes(values: np.ndarray) -> bytes:
    """8 bit binary greyscale image, the maximum maps to white."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    peak = values.max(initial=0.0)
    scaled = values / peak if peak > 0.0 else np.zeros_like(values)
    pixels = np.round(scaled * 255.0).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(file: Path, grid: DensityGrid | np.ndarray) -> None:
    """Heatmap with deaths growing upwards and births to the right."""
    values = grid.values if isinstance(grid, DensityGrid) else np.asarray(grid)
    file.write_bytes(pgm_bytes(np.flipud(np.atleast_2d(values).T)))


def write_density_curve(file: Path, density: ScalarDensity) -> None:
    lines = ["z,density\n"]
    lines.extend(
        f"{format_float(z)},{format_float(value)}\n"
        for z, value in zip(density.grid, density.values, strict=True)
    )
    file.write_text("".join(lines))


def write_report(file: Path, report: BaseModel) -> None:
    logger.info("writing report to %s", file)
    file.write_text(report.model_dump_json(indent=2))


def write_sweep_csv(file: Path, table: SweepTable, names: Sequence[str] | None = None) -> None:
    """One row per noise level and ordered class pair."""
    lines = ["level,regime,core,candidate,overlap,mean_overlap\n"]
    for row in table.rows:
        for pair in row.pairs:
            core, candidate = (
                (names[pair.core], names[pair.candidate])
                if names
                else (str(pair.core), str(pair.candidate))
            )
            lines.append(
                f"{format_float(row.level)},{row.regime},{core},{candidate},"
                f"{format_float(pair.overlap)},{format_float(row.mean_overlap)}\n"
            )
    file.write_text("".join(lines))
