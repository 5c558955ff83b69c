from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from crosspers.utils import as_readonly


class DimensionMismatchError(ValueError): ...


class SeriesTooShortError(ValueError): ...


@dataclass(frozen=True, slots=True)
class PointCloud:
    """Ordered sample of ``n`` points in ``d`` dimensions.

    The coordinate array is copied on construction and stored read-only.
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, np.newaxis]
        if points.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {points.shape}")
        if points.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if points.shape[1] < 1:
            raise ValueError("point dimension must be >= 1")
        if not np.all(np.isfinite(points)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", as_readonly(points))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n_points

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)

    def subsample(self, indices: np.ndarray | Sequence[int]) -> PointCloud:
        return PointCloud(self.points[np.asarray(indices, dtype=int)])

    def scaled(self, factor: float) -> PointCloud:
        return PointCloud(self.points * factor)

    def concatenate(self, other: PointCloud) -> PointCloud:
        check_same_dim(self, other)
        return PointCloud(np.vstack((self.points, other.points)))

    def same_as(self, other: PointCloud) -> bool:
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )


def check_same_dim(left: PointCloud, right: PointCloud) -> None:
    if left.dim != right.dim:
        raise DimensionMismatchError(
            f"point clouds have different dimensions: {left.dim} != {right.dim}"
        )


@dataclass(frozen=True, slots=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise distances with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"distance matrix must be square, got {entries.shape}")
        if np.any(entries < 0.0):
            raise ValueError("distance matrix has negative entries")
        object.__setattr__(self, "entries", as_readonly(entries))

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, slots=True)
class CrossDistanceMatrix:
    """Distances of the union of two clouds with the right block zeroed.

    Left points are indexed first, right points follow. Storage is symmetric.
    """

    entries: np.ndarray
    n_left: int
    n_right: int

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        size = self.n_left + self.n_right
        if entries.shape != (size, size):
            raise DimensionMismatchError(
                f"cross matrix shape {entries.shape} does not match "
                f"{self.n_left} + {self.n_right} points"
            )
        if np.any(entries[self.n_left :, self.n_left :] != 0.0):
            raise ValueError("right block of a cross distance matrix must be zero")
        object.__setattr__(self, "entries", as_readonly(entries))

    @property
    def size(self) -> int:
        return self.n_left + self.n_right


@dataclass(frozen=True, slots=True)
class TimeSeries:
    values: np.ndarray
    label: str | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size < 2:
            raise SeriesTooShortError(
                f"time series needs at least 2 samples, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("time series contains non-finite values")
        object.__setattr__(self, "values", as_readonly(values))

    @property
    def length(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.length
