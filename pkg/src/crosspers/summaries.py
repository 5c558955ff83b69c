"""Linear representations of persistence diagrams."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator
from scipy.stats import entropy
from typing_extensions import Self

from crosspers.kernels import gaussian, silverman_bandwidth
from crosspers.persistence import PersistenceDiagram
from crosspers.utils import as_readonly

logger = logging.getLogger(__name__)

Weighting = Literal["constant", "lifetime", "auto"]
SummaryKind = Literal["mtd", "entropy"]
PAD_BANDWIDTHS = 3.0


class EmptyDatasetError(ValueError): ...


def mtd(diagram: PersistenceDiagram) -> float:
    """Total length of the finite positive-length bars."""
    return float(np.sum(diagram.lifetimes()))


def persistence_entropy(diagram: PersistenceDiagram) -> float:
    """Shannon entropy (natural log) of the normalized bar lengths."""
    lifetimes = diagram.lifetimes()
    if lifetimes.size <= 1:
        return 0.0
    return float(entropy(lifetimes))


@dataclass(frozen=True, slots=True)
class Summary:
    kind: SummaryKind
    value: float


def summarize(diagram: PersistenceDiagram, kind: SummaryKind) -> Summary:
    match kind:
        case "mtd":
            return Summary(kind, mtd(diagram))
        case "entropy":
            return Summary(kind, persistence_entropy(diagram))
    raise ValueError(f"unknown summary {kind!r}")


class GridSpec(BaseModel):
    """Rectangle ``[x_min, x_max] x [y_min, y_max]`` split into ``nx x ny`` cells.

    The x axis holds births and the y axis deaths. A grid with ``nx == 1`` is
    a 1-D grid along the death axis, ``ny == 1`` a 1-D grid along x.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0
    nx: PositiveInt = Field(default=20, description="Number of cells along x.")
    ny: PositiveInt = Field(default=20, description="Number of cells along y.")

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("grid bounds are inverted")
        if self.nx > 1 and self.x_max == self.x_min:
            raise ValueError("x extent is zero but nx > 1")
        if self.ny > 1 and self.y_max == self.y_min:
            raise ValueError("y extent is zero but ny > 1")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def x_centers(self) -> np.ndarray:
        step = (self.x_max - self.x_min) / self.nx
        return self.x_min + (np.arange(self.nx) + 0.5) * step

    def y_centers(self) -> np.ndarray:
        step = (self.y_max - self.y_min) / self.ny
        return self.y_min + (np.arange(self.ny) + 0.5) * step

    @classmethod
    def from_diagrams(
        cls,
        diagrams: Sequence[PersistenceDiagram],
        bandwidth: float,
        nx: int,
        ny: int,
    ) -> GridSpec:
        """Bounding box of all finite points padded by three bandwidths.

        Build it once per experiment and reuse it for every image.
        """
        points = pooled_points(diagrams)
        pad = PAD_BANDWIDTHS * bandwidth
        if points.size == 0:
            low, high = np.zeros(2), np.zeros(2)
        else:
            low, high = points.min(axis=0), points.max(axis=0)
        return cls(
            x_min=float(low[0] - pad) if nx > 1 else float(low[0]),
            x_max=float(high[0] + pad) if nx > 1 else float(low[0]),
            y_min=float(low[1] - pad) if ny > 1 else float(low[1]),
            y_max=float(high[1] + pad) if ny > 1 else float(low[1]),
            nx=nx,
            ny=ny,
        )

    @classmethod
    def for_values(cls, values: np.ndarray, bandwidth: float, nz: int) -> GridSpec:
        """1-D grid along x covering scalar values padded by three bandwidths."""
        values = np.asarray(values, dtype=float)
        pad = PAD_BANDWIDTHS * bandwidth
        return cls(
            x_min=float(values.min() - pad),
            x_max=float(values.max() + pad),
            y_min=0.0,
            y_max=0.0,
            nx=nz,
            ny=1,
        )


@dataclass(frozen=True, slots=True)
class DensityGrid:
    """Non-negative values on the cells of a :class:`GridSpec`."""

    spec: GridSpec
    values: np.ndarray
    normalized: bool = False
    bandwidth: float | None = None
    weighting: str | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(self.spec.shape)
        if np.any(values < 0.0):
            raise ValueError("density grid has negative values")
        if self.normalized and abs(values.sum() - 1.0) > 1e-9:
            raise ValueError(f"normalized grid sums to {values.sum()}")
        object.__setattr__(self, "values", as_readonly(values))

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    def total(self) -> float:
        return float(self.values.sum())

    def argmax(self) -> tuple[int, int]:
        idx = np.unravel_index(int(np.argmax(self.values)), self.shape)
        return int(idx[0]), int(idx[1])

    def normalized_copy(self) -> DensityGrid:
        """Rescale to sum 1; an all-zero grid becomes uniform."""
        total = self.total()
        if total > 0.0:
            values = self.values / total
        else:
            logger.warning("normalizing an all-zero grid, using the uniform distribution")
            values = np.full(self.shape, 1.0 / self.spec.n_cells)
        values = values / values.sum()
        return DensityGrid(
            spec=self.spec,
            values=values,
            normalized=True,
            bandwidth=self.bandwidth,
            weighting=self.weighting,
        )

    def sidecar(self) -> dict:
        return {
            "bounds": [self.spec.x_min, self.spec.x_max, self.spec.y_min, self.spec.y_max],
            "resolution": [self.spec.nx, self.spec.ny],
            "bandwidth": self.bandwidth,
            "weighting": self.weighting,
            "normalized": self.normalized,
        }


def pooled_points(diagrams: Sequence[PersistenceDiagram]) -> np.ndarray:
    finite = [diagram.finite().pairs for diagram in diagrams]
    if not finite:
        return np.empty((0, 2))
    return np.vstack(finite)


def diagram_bandwidth(diagrams: Sequence[PersistenceDiagram]) -> float:
    """Silverman bandwidth on the pooled finite points, averaged over axes.

    Axes without spread (births of a 0-dim cross-barcode) are ignored.
    """
    points = pooled_points(diagrams)
    if points.shape[0] == 0:
        return 1e-3
    per_axis = [
        silverman_bandwidth(points[:, axis])
        for axis in range(2)
        if np.ptp(points[:, axis]) > 0.0
    ]
    if not per_axis:
        return silverman_bandwidth(points[:, 1])
    return float(np.mean(per_axis))


def resolve_weighting(weighting: Weighting, dim: int) -> Literal["constant", "lifetime"]:
    if weighting == "auto":
        return "constant" if dim == 0 else "lifetime"
    return weighting


def persistence_image(
    diagram: PersistenceDiagram,
    grid: GridSpec,
    bandwidth: float,
    weighting: Weighting = "auto",
) -> DensityGrid:
    """Sum of weighted Gaussian bumps at the finite diagram points.

    Bumps are evaluated at the cell centres. A grid with ``nx == 1`` only
    resolves deaths, one with ``ny == 1`` only births.
    """
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    weighting = resolve_weighting(weighting, diagram.dim)
    finite = diagram.finite()
    births, deaths = finite.births, finite.deaths
    weights = np.ones_like(births) if weighting == "constant" else deaths - births

    x_kernel = (
        gaussian(grid.x_centers()[:, np.newaxis] - births, bandwidth)
        if grid.nx > 1
        else np.ones((1, births.size))
    )
    y_kernel = (
        gaussian(grid.y_centers()[:, np.newaxis] - deaths, bandwidth)
        if grid.ny > 1
        else np.ones((1, deaths.size))
    )
    values = (x_kernel * weights) @ y_kernel.T
    return DensityGrid(spec=grid, values=values, bandwidth=bandwidth, weighting=weighting)


def expected_density(
    diagrams: Sequence[PersistenceDiagram],
    grid: GridSpec,
    bandwidth: float,
    weighting: Weighting = "auto",
    normalize: bool = False,
) -> DensityGrid:
    """Mean persistence image of a set of diagrams.

    Raises:
        EmptyDatasetError: If no diagrams are given.
    """
    if not diagrams:
        raise EmptyDatasetError("expected density needs at least one diagram")
    images = [persistence_image(d, grid, bandwidth, weighting) for d in diagrams]
    mean = np.mean([image.values for image in images], axis=0)
    density = DensityGrid(
        spec=grid,
        values=mean,
        bandwidth=bandwidth,
        weighting=images[0].weighting,
    )
    return density.normalized_copy() if normalize else density
