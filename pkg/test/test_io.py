from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from crosspers.io import (
    CloudFormatError,
    pgm_bytes,
    read_cloud,
    read_diagrams,
    read_grid,
    read_labelled_series,
    read_series,
    write_cloud,
    write_density_curve,
    write_diagrams,
    write_grid,
    write_labelled_series,
    write_pgm,
    write_sweep_csv,
)
from crosspers.models.cloud import PointCloud, TimeSeries
from crosspers.persistence import PersistenceDiagram
from crosspers.stats import PairOverlap, SweepConfig, SweepRow, SweepTable, kde1d
from crosspers.summaries import DensityGrid, GridSpec


def test_read_cloud(tmp_path: Path) -> None:
    file = tmp_path / "cloud.csv"
    file.write_text("# two points\n0.0, 1.0\n\n2.5,-1e-3\n")
    cloud = read_cloud(file)
    np.testing.assert_array_equal(cloud.points, [[0.0, 1.0], [2.5, -1e-3]])


@pytest.mark.parametrize(
    ("content", "lineno"),
    [
        ("0,1\n1,2,3\n", 2),
        ("0,1\n\n1,x\n", 3),
        ("0,nan\n", 1),
        ("# nothing\n", 1),
    ],
)
def test_malformed_cloud(tmp_path: Path, content: str, lineno: int) -> None:
    file = tmp_path / "bad.csv"
    file.write_text(content)
    with pytest.raises(CloudFormatError) as exc_info:
        read_cloud(file)
    assert exc_info.value.lineno == lineno
    assert str(exc_info.value).startswith(f"{file}:{lineno}:")


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        read_cloud(tmp_path / "missing.csv")


def test_cloud_file_is_lossless(tmp_path: Path, rng: np.random.Generator) -> None:
    cloud = PointCloud(rng.normal(size=(10, 3)))
    write_cloud(tmp_path / "cloud.csv", cloud)
    assert read_cloud(tmp_path / "cloud.csv").same_as(cloud)


def test_series_files(tmp_path: Path) -> None:
    file = tmp_path / "series.csv"
    file.write_text("1\n2\n3.5\n")
    series = read_series(file)
    np.testing.assert_array_equal(series.values, [1.0, 2.0, 3.5])
    assert series.label == "series"

    file.write_text("1,2\n")
    with pytest.raises(CloudFormatError):
        read_series(file)

    labelled = tmp_path / "labelled.csv"
    write_labelled_series(
        labelled, [TimeSeries(np.arange(4.0)), TimeSeries(np.ones(4))], [1, 0]
    )
    series, labels = read_labelled_series(labelled)
    np.testing.assert_array_equal(labels, [1, 0])
    np.testing.assert_array_equal(series[0].values, np.arange(4.0))

    labelled.write_text("a,1,2\n")
    with pytest.raises(CloudFormatError):
        read_labelled_series(labelled)


def test_diagrams(tmp_path: Path) -> None:
    diagrams = [
        PersistenceDiagram.from_pairs(0, [(0.0, 0.5), (0.0, np.inf)]),
        PersistenceDiagram.from_pairs(1, [(1.0, 1.4142135623730951)]),
    ]
    file = tmp_path / "diagrams.csv"
    write_diagrams(file, diagrams)
    lines = file.read_text().splitlines()
    assert lines[0] == "dim,birth,death"
    assert lines[2] == "0,0,inf"

    read = read_diagrams(file)
    assert sorted(read) == [0, 1]
    np.testing.assert_array_equal(read[1].pairs, diagrams[1].pairs)
    assert read[0].as_multiset(drop_zero=False) == diagrams[0].as_multiset(drop_zero=False)


def test_grid_sidecar(tmp_path: Path) -> None:
    spec = GridSpec(x_min=0.0, x_max=2.0, y_min=0.0, y_max=1.0, nx=2, ny=3)
    grid = DensityGrid(
        spec=spec,
        values=np.arange(6.0) / 15.0,
        normalized=True,
        bandwidth=0.25,
        weighting="lifetime",
    )
    file = tmp_path / "grid.csv"
    sidecar = write_grid(file, grid)
    assert sidecar == tmp_path / "grid.json"
    assert len(file.read_text().splitlines()) == 2

    read = read_grid(file)
    assert read.spec == spec
    assert read.bandwidth == 0.25
    assert read.weighting == "lifetime"
    np.testing.assert_array_equal(read.values, grid.values)


def test_pgm(tmp_path: Path) -> None:
    image = pgm_bytes(np.array([[0.0, 1.0, 2.0]]))
    assert image.startswith(b"P5\n3 1\n255\n")
    assert image[-3:] == bytes([0, 128, 255])
    assert pgm_bytes(np.zeros((2, 2)))[-4:] == bytes(4)

    grid = DensityGrid(spec=GridSpec(nx=2, ny=3), values=np.arange(6.0))
    write_pgm(tmp_path / "grid.pgm", grid)
    assert (tmp_path / "grid.pgm").read_bytes().startswith(b"P5\n2 3\n255\n")


def test_density_curve(tmp_path: Path) -> None:
    density = kde1d([0.0, 1.0, 2.0], n_grid=16)
    file = tmp_path / "density.csv"
    write_density_curve(file, density)
    lines = file.read_text().splitlines()
    assert lines[0] == "z,density"
    assert density.nz >= 16
    assert len(lines) == density.nz + 1


def test_sweep_csv(tmp_path: Path) -> None:
    pair = PairOverlap(core=0, candidate=1, overlap=0.25, self_std=0.1, cross_std=0.2)
    table = SweepTable(
        rows=[SweepRow(level=0.5, regime="both", mean_overlap=0.25, pairs=[pair])],
        config=SweepConfig(),
    )
    file = tmp_path / "sweep.csv"
    write_sweep_csv(file, table, names=["circle", "blob"])
    assert file.read_text().splitlines() == [
        "level,regime,core,candidate,overlap,mean_overlap",
        "0.5,both,circle,blob,0.25,0.25",
    ]
