from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from crosspers.datasets import circles
from crosspers.kernels import silverman_bandwidth
from crosspers.models.cloud import PointCloud
from crosspers.persistence import PersistenceDiagram, cross_barcode
from crosspers.summaries import (
    DensityGrid,
    EmptyDatasetError,
    GridSpec,
    diagram_bandwidth,
    expected_density,
    mtd,
    persistence_entropy,
    persistence_image,
    summarize,
)


def diagram(*pairs: tuple[float, float], dim: int = 1) -> PersistenceDiagram:
    return PersistenceDiagram.from_pairs(dim, pairs)


def test_mtd() -> None:
    assert mtd(diagram()) == 0.0
    assert mtd(diagram((0.0, 1.0), (0.5, 2.0))) == 2.5
    assert mtd(diagram((0.0, 1.0), (0.3, np.inf))) == 1.0


def test_mtd_of_duplicate_clouds() -> None:
    cloud = circles(20, 1, seed=5, noise=0.1)
    assert mtd(cross_barcode(cloud, PointCloud(cloud.points.copy()), 1)) == 0.0


def test_persistence_entropy() -> None:
    assert persistence_entropy(diagram()) == 0.0
    assert persistence_entropy(diagram((0.0, 2.0))) == 0.0
    assert persistence_entropy(diagram(*[(0.0, 1.5)] * 5)) == pytest.approx(np.log(5))
    assert persistence_entropy(diagram((0.0, 1.0), (0.0, 3.0))) == pytest.approx(
        -(0.25 * np.log(0.25) + 0.75 * np.log(0.75)), abs=1e-12
    )
    assert summarize(diagram((0.0, 1.0), (0.0, 3.0)), "entropy").value == pytest.approx(
        0.5623, abs=1e-4
    )


def test_metric_scaling(rng: np.random.Generator) -> None:
    left = PointCloud(rng.normal(size=(10, 2)))
    right = PointCloud(rng.normal(size=(10, 2)))
    base = cross_barcode(left, right, 0)
    scaled = cross_barcode(left.scaled(3.0), right.scaled(3.0), 0)
    assert mtd(scaled) == pytest.approx(3.0 * mtd(base), rel=1e-12)
    assert persistence_entropy(scaled) == pytest.approx(persistence_entropy(base), abs=1e-9)


def test_grid_spec() -> None:
    grid = GridSpec(x_min=0.0, x_max=2.0, y_min=0.0, y_max=1.0, nx=4, ny=2)
    np.testing.assert_allclose(grid.x_centers(), [0.25, 0.75, 1.25, 1.75])
    np.testing.assert_allclose(grid.y_centers(), [0.25, 0.75])
    assert grid.n_cells == 8

    with pytest.raises(ValidationError):
        GridSpec(x_min=1.0, x_max=0.0)
    with pytest.raises(ValidationError):
        GridSpec(x_min=0.0, x_max=0.0, nx=3)
    with pytest.raises(ValidationError):
        GridSpec(nx=0)


def test_grid_from_diagrams() -> None:
    diagrams = [diagram((0.1, 0.5)), diagram((0.2, 0.9), (0.0, 0.4))]
    grid = GridSpec.from_diagrams(diagrams, bandwidth=0.1, nx=10, ny=10)
    assert grid.x_min == pytest.approx(-0.3)
    assert grid.x_max == pytest.approx(0.5)
    assert grid.y_min == pytest.approx(0.1)
    assert grid.y_max == pytest.approx(1.2)

    deaths_only = GridSpec.from_diagrams(diagrams, bandwidth=0.1, nx=1, ny=10)
    assert deaths_only.x_min == deaths_only.x_max


def test_persistence_image_empty() -> None:
    grid = GridSpec(nx=5, ny=5)
    image = persistence_image(diagram(), grid, bandwidth=0.1)
    assert image.total() == 0.0


def test_persistence_image_peak() -> None:
    grid = GridSpec(x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0, nx=11, ny=11)
    image = persistence_image(
        diagram((0.5, 0.5 + 1e-9)), grid, bandwidth=0.1, weighting="constant"
    )
    assert image.argmax() == (5, 5)


def test_persistence_image_is_linear() -> None:
    grid = GridSpec(x_min=0.0, x_max=5.0, y_min=0.0, y_max=6.0, nx=16, ny=12)
    first, second = diagram((0.5, 1.0)), diagram((4.0, 5.5))
    both = diagram((0.5, 1.0), (4.0, 5.5))
    summed = (
        persistence_image(first, grid, 0.3).values
        + persistence_image(second, grid, 0.3).values
    )
    np.testing.assert_allclose(persistence_image(both, grid, 0.3).values, summed, atol=1e-12)


def test_persistence_image_weighting() -> None:
    grid = GridSpec(x_min=0.0, x_max=2.0, y_min=0.0, y_max=4.0, nx=8, ny=8)
    long_bar = diagram((0.5, 3.0))
    constant = persistence_image(long_bar, grid, 0.2, weighting="constant")
    lifetime = persistence_image(long_bar, grid, 0.2, weighting="lifetime")
    np.testing.assert_allclose(lifetime.values, 2.5 * constant.values)

    h0 = persistence_image(diagram((0.0, 1.0), dim=0), grid, 0.2)
    assert h0.weighting == "constant"
    assert persistence_image(long_bar, grid, 0.2).weighting == "lifetime"

    with pytest.raises(ValueError):
        persistence_image(long_bar, grid, 0.0)


def test_persistence_image_death_axis() -> None:
    grid = GridSpec(x_min=0.0, x_max=0.0, y_min=0.0, y_max=2.0, nx=1, ny=10)
    image = persistence_image(diagram((0.0, 1.0), dim=0), grid, 0.2)
    assert image.shape == (1, 10)
    assert image.argmax() in ((0, 4), (0, 5))


def test_expected_density() -> None:
    grid = GridSpec(x_min=0.0, x_max=3.0, y_min=0.0, y_max=4.0, nx=9, ny=9)
    a = diagram((0.5, 1.0), (1.0, 3.0))
    b = diagram((2.0, 2.5))
    c = diagram()

    single = expected_density([a], grid, 0.3)
    np.testing.assert_array_equal(single.values, persistence_image(a, grid, 0.3).values)

    twice = expected_density([a, a], grid, 0.3)
    np.testing.assert_allclose(twice.values, single.values, rtol=1e-15)

    images = [persistence_image(d, grid, 0.3).values for d in (a, b, c)]
    mean = expected_density([a, b, c], grid, 0.3)
    np.testing.assert_allclose(mean.values, np.mean(images, axis=0), rtol=1e-12)

    normalized = expected_density([a, b, c], grid, 0.3, normalize=True)
    assert normalized.normalized
    assert normalized.total() == pytest.approx(1.0, abs=1e-9)

    with pytest.raises(EmptyDatasetError):
        expected_density([], grid, 0.3)


def test_density_grid() -> None:
    grid = GridSpec(nx=2, ny=2)
    zeros = DensityGrid(spec=grid, values=np.zeros((2, 2)))
    np.testing.assert_allclose(zeros.normalized_copy().values, 0.25)

    with pytest.raises(ValueError):
        DensityGrid(spec=grid, values=-np.ones((2, 2)))
    with pytest.raises(ValueError):
        DensityGrid(spec=grid, values=np.ones((2, 2)), normalized=True)

    sidecar = DensityGrid(spec=grid, values=np.ones((2, 2)), bandwidth=0.5).sidecar()
    assert sidecar["resolution"] == [2, 2]
    assert sidecar["bandwidth"] == 0.5


def test_bandwidths() -> None:
    samples = np.array([1.0, 2.0, 3.0, 4.0, 10.0])
    std = np.std(samples, ddof=1)
    iqr = 4.0 - 2.0
    assert silverman_bandwidth(samples) == pytest.approx(
        0.9 * min(std, iqr / 1.34) * 5 ** (-0.2)
    )
    assert silverman_bandwidth(np.full(10, 4.0)) == pytest.approx(4e-3)

    h0 = [diagram((0.0, 1.0), (0.0, 2.0), (0.0, 4.0), dim=0)]
    assert diagram_bandwidth(h0) == pytest.approx(silverman_bandwidth(np.array([1.0, 2.0, 4.0])))
    assert diagram_bandwidth([diagram()]) == 1e-3
