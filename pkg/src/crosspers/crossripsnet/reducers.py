"""Per-point summaries of the cross distance matrix.

Every row of the ``(n_left + n_right)`` square cross matrix is reduced to
``k`` features, one feature row per point of the union.
"""

from __future__ import annotations

import logging
from typing import Annotated, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, PositiveInt, PrivateAttr

from crosspers.geometry import PcaProjection, fit_pca_array
from crosspers.models.cloud import CrossDistanceMatrix
from crosspers.utils import as_readonly

logger = logging.getLogger(__name__)


class ReducerSizeError(ValueError): ...


class DistanceReducer(BaseModel):
    k: PositiveInt = Field(
        default=60,
        description="Number of features per matrix row.",
    )

    @classmethod
    def get_subclasses(cls) -> tuple[type[DistanceReducer], ...]:
        return tuple(cls.__subclasses__())

    @property
    def is_fitted(self) -> bool:
        return True

    def fit(self, matrices: Sequence[CrossDistanceMatrix]) -> None:
        """Learn state from training matrices, nothing to learn by default."""

    def _check_row_length(self, row_length: int) -> None:
        if self.k > row_length:
            raise ReducerSizeError(
                f"k={self.k} exceeds the matrix row length {row_length}"
            )

    def transform(self, cross: CrossDistanceMatrix) -> np.ndarray:
        raise NotImplementedError


class TopKMaxReducer(DistanceReducer):
    """The ``k`` largest entries of every row in descending order."""

    reducer: Literal["topk_max"] = "topk_max"

    def transform(self, cross: CrossDistanceMatrix) -> np.ndarray:
        self._check_row_length(cross.size)
        return -np.sort(-cross.entries, axis=1)[:, : self.k]


class QuantileReducer(DistanceReducer):
    """``k`` evenly spaced quantiles of every row, linearly interpolated."""

    reducer: Literal["quantiles"] = "quantiles"

    def transform(self, cross: CrossDistanceMatrix) -> np.ndarray:
        self._check_row_length(cross.size)
        levels = np.linspace(0.0, 1.0, self.k)
        return np.quantile(cross.entries, levels, axis=1).T


class PcaReducer(DistanceReducer):
    """Principal components of descending-sorted matrix rows.

    Rows are sorted, then truncated or zero-padded to the row length seen
    during :meth:`fit`. The projection is frozen after fitting.
    """

    reducer: Literal["pca"] = "pca"
    row_length: PositiveInt | None = Field(
        default=None,
        description="Row length of the fitted projection, set by fit.",
    )
    mean: list[float] | None = None
    components: list[list[float]] | None = None

    _projection: PcaProjection | None = PrivateAttr(None)

    @property
    def is_fitted(self) -> bool:
        return self.components is not None

    def _sorted_rows(self, cross: CrossDistanceMatrix, length: int) -> np.ndarray:
        rows = -np.sort(-cross.entries, axis=1)
        if rows.shape[1] >= length:
            return rows[:, :length]
        return np.pad(rows, ((0, 0), (0, length - rows.shape[1])))

    def fit(self, matrices: Sequence[CrossDistanceMatrix]) -> None:
        if not matrices:
            raise ValueError("pca reducer needs at least one training matrix")
        length = max(cross.size for cross in matrices)
        self._check_row_length(length)
        rows = np.vstack([self._sorted_rows(cross, length) for cross in matrices])
        projection = fit_pca_array(rows, self.k)
        self.row_length = length
        self.mean = projection.mean.tolist()
        self.components = projection.components.tolist()
        self._projection = projection
        logger.debug("fitted pca reducer on %d rows of length %d", len(rows), length)

    def projection(self) -> PcaProjection:
        if self._projection is None:
            if not self.is_fitted:
                raise ValueError("pca reducer is not fitted")
            components = np.array(self.components)
            self._projection = PcaProjection(
                mean=as_readonly(self.mean),
                components=as_readonly(components),
                explained_variance=as_readonly(np.zeros(components.shape[1])),
            )
        return self._projection

    def transform(self, cross: CrossDistanceMatrix) -> np.ndarray:
        projection = self.projection()
        return projection.transform_array(self._sorted_rows(cross, self.row_length))


DistanceReducerType = Annotated[
    Union[DistanceReducer.get_subclasses()],
    Field(discriminator="reducer"),
]
ReducerMethod = Literal["pca", "topk_max", "quantiles"]


def make_reducer(method: ReducerMethod, k: int) -> DistanceReducer:
    for reducer_cls in DistanceReducer.get_subclasses():
        if reducer_cls.model_fields["reducer"].default == method:
            return reducer_cls(k=k)
    raise ValueError(f"unknown distance reducer {method!r}")


def distance_features(
    cross: CrossDistanceMatrix,
    method: ReducerMethod,
    k: int,
) -> np.ndarray:
    """Reduce every row of ``cross`` to ``k`` features.

    The pca method fits its projection on the rows of ``cross`` itself.

    Raises:
        ReducerSizeError: If ``k`` exceeds the row length.
    """
    reducer = make_reducer(method, k)
    if not reducer.is_fitted:
        reducer.fit([cross])
    return reducer.transform(cross)
