"""Column reduction over Z/2 and cross-barcodes."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from crosspers.filtration import (
    Filtration,
    MaxScale,
    boundary_faces,
    cross_vr_filtration,
    resolve_max_scale,
    vr_filtration,
)
from crosspers.geometry import cross_distance_matrix, pairwise_distances
from crosspers.models.cloud import (
    CrossDistanceMatrix,
    DistanceMatrix,
    PointCloud,
)
from crosspers.utils import as_readonly

logger = logging.getLogger(__name__)

Engine = Literal["native", "ripser", "auto"]
RIPSER_MIN_POINTS = 64


class FiltrationOrderError(ValueError): ...


@dataclass(frozen=True, slots=True)
class PersistenceDiagram:
    """Multiset of ``(birth, death)`` pairs in homology dimension ``dim``.

    ``pairs`` has shape ``(m, 2)``, essential classes have ``death = inf``.
    Zero-length pairs are kept, summaries drop them.
    """

    dim: int
    pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self) -> None:
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        if np.any(pairs[:, 0] > pairs[:, 1]):
            raise ValueError("birth exceeds death in a persistence pair")
        object.__setattr__(self, "pairs", as_readonly(pairs))

    @classmethod
    def from_pairs(
        cls, dim: int, pairs: Iterable[tuple[float, float]]
    ) -> PersistenceDiagram:
        return cls(dim=dim, pairs=np.array(list(pairs), dtype=float).reshape(-1, 2))

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def births(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.pairs[:, 1]

    def essential_mask(self) -> np.ndarray:
        return np.isinf(self.deaths)

    def zero_length_mask(self) -> np.ndarray:
        return self.births == self.deaths

    def finite(self, drop_zero: bool = True) -> PersistenceDiagram:
        """Finite pairs, without zero-length pairs unless ``drop_zero`` is off."""
        mask = ~self.essential_mask()
        if drop_zero:
            mask &= ~self.zero_length_mask()
        return PersistenceDiagram(dim=self.dim, pairs=self.pairs[mask])

    def essential(self) -> PersistenceDiagram:
        return PersistenceDiagram(dim=self.dim, pairs=self.pairs[self.essential_mask()])

    def lifetimes(self) -> np.ndarray:
        """Lifetimes of the finite positive-length pairs."""
        finite = self.finite()
        return finite.deaths - finite.births

    def as_multiset(self, drop_zero: bool = True) -> Counter[tuple[float, float]]:
        pairs = self.pairs
        if drop_zero:
            pairs = pairs[~self.zero_length_mask()]
        return Counter(map(tuple, pairs.tolist()))

    def sorted(self) -> PersistenceDiagram:
        order = np.lexsort((self.deaths, self.births))
        return PersistenceDiagram(dim=self.dim, pairs=self.pairs[order])


@dataclass(frozen=True, slots=True)
class ReductionTrace:
    """Pairing produced by the reduction.

    Attributes:
        pairs: Birth simplex index to the index of the simplex killing it.
        essential: Indices of unpaired positive simplices.
    """

    pairs: dict[int, int]
    essential: tuple[int, ...]

    def partner(self, index: int) -> int | None:
        return self.pairs.get(index)


def reduce_trace(
    filt: Filtration,
    max_hom_dim: int,
    clearing: bool = True,
) -> ReductionTrace:
    """Standard column reduction of the boundary matrix.

    Columns are sets of row indices, the pivot is the largest index. With
    ``clearing`` dimensions are processed top-down and columns already known
    to be paired as births are skipped.

    Raises:
        FiltrationOrderError: If the filtration is unsorted or a face does not
            precede its coface.
    """
    if not 0 <= max_hom_dim <= filt.max_dim:
        raise ValueError(
            f"max_hom_dim must be within [0, {filt.max_dim}], got {max_hom_dim}"
        )
    if not filt.is_sorted():
        raise FiltrationOrderError("filtration is not sorted by (value, dim, vertices)")

    position = {simplex: idx for idx, simplex in enumerate(filt.simplices)}
    by_dim: list[list[int]] = [[] for _ in range(max_hom_dim + 2)]
    for idx, simplex in enumerate(filt.simplices):
        dim = len(simplex) - 1
        if dim <= max_hom_dim + 1:
            by_dim[dim].append(idx)

    pivots: dict[int, int] = {}
    reduced: dict[int, set[int]] = {}
    n_cleared = 0

    for dim in range(max_hom_dim + 1, 0, -1):
        for col_idx in by_dim[dim]:
            # a paired birth simplex reduces to zero
            if clearing and col_idx in pivots:
                n_cleared += 1
                continue
            column = set()
            for face in boundary_faces(filt.simplices[col_idx]):
                face_idx = position.get(face)
                if face_idx is None or face_idx >= col_idx:
                    raise FiltrationOrderError(
                        f"face {face} of simplex {filt.simplices[col_idx]} "
                        "is missing or listed after its coface"
                    )
                column.add(face_idx)

            while column:
                low = max(column)
                other = pivots.get(low)
                if other is None:
                    pivots[low] = col_idx
                    reduced[col_idx] = column
                    break
                column ^= reduced[other]

    essential = tuple(
        idx
        for dim in range(max_hom_dim + 1)
        for idx in by_dim[dim]
        if idx not in pivots and idx not in reduced
    )
    logger.debug(
        "reduced %d simplices, %d pairs, %d essential, %d cleared columns",
        len(filt),
        len(pivots),
        len(essential),
        n_cleared,
    )
    return ReductionTrace(pairs=pivots, essential=essential)


def diagrams_from_trace(
    filt: Filtration, trace: ReductionTrace, max_hom_dim: int
) -> list[PersistenceDiagram]:
    pairs: list[list[tuple[float, float]]] = [[] for _ in range(max_hom_dim + 1)]
    for birth, death in trace.pairs.items():
        dim = len(filt.simplices[birth]) - 1
        if dim <= max_hom_dim:
            pairs[dim].append((float(filt.values[birth]), float(filt.values[death])))
    for birth in trace.essential:
        dim = len(filt.simplices[birth]) - 1
        pairs[dim].append((float(filt.values[birth]), np.inf))
    return [
        PersistenceDiagram.from_pairs(dim, dim_pairs).sorted()
        for dim, dim_pairs in enumerate(pairs)
    ]


def reduce(
    filt: Filtration,
    max_hom_dim: int,
    clearing: bool = True,
) -> list[PersistenceDiagram]:
    """Persistence diagrams of dimensions ``0..max_hom_dim``."""
    trace = reduce_trace(filt, max_hom_dim, clearing=clearing)
    return diagrams_from_trace(filt, trace, max_hom_dim)


def ripser_available() -> bool:
    try:
        import ripser  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_engine(engine: Engine, n_points: int) -> Literal["native", "ripser"]:
    match engine:
        case "native":
            return "native"
        case "ripser":
            if not ripser_available():
                logger.warning("ripser is not installed, using the native engine")
                return "native"
            return "ripser"
        case "auto":
            if n_points > RIPSER_MIN_POINTS and ripser_available():
                return "ripser"
            return "native"
        case _:
            raise ValueError(f"unknown persistence engine {engine!r}")


def _ripser_diagrams(
    entries: np.ndarray, max_hom_dim: int, max_scale: float
) -> list[PersistenceDiagram]:
    from ripser import ripser

    result = ripser(
        np.asarray(entries, dtype=float),
        maxdim=max_hom_dim,
        thresh=max_scale,
        distance_matrix=True,
    )
    return [
        PersistenceDiagram(dim=dim, pairs=np.asarray(dgm, dtype=float)).sorted()
        for dim, dgm in enumerate(result["dgms"])
    ]


def _diagrams_of_matrix(
    matrix: DistanceMatrix | CrossDistanceMatrix,
    filtration_builder: Callable[..., Filtration],
    max_hom_dim: int,
    max_scale: MaxScale,
    engine: Engine,
) -> list[PersistenceDiagram]:
    match resolve_engine(engine, matrix.size):
        case "ripser":
            scale = resolve_max_scale(matrix.entries, max_scale)
            return _ripser_diagrams(matrix.entries, max_hom_dim, scale)
        case _:
            filt = filtration_builder(matrix, max_hom_dim, max_scale)
            return reduce(filt, max_hom_dim)


def vr_diagrams(
    cloud: PointCloud,
    max_hom_dim: int,
    max_scale: MaxScale = "auto",
    engine: Engine = "native",
) -> list[PersistenceDiagram]:
    """Vietoris-Rips diagrams of a single cloud."""
    dist = pairwise_distances(cloud)
    return _diagrams_of_matrix(dist, vr_filtration, max_hom_dim, max_scale, engine)


def cross_barcodes(
    left: PointCloud,
    right: PointCloud,
    dims: Sequence[int],
    max_scale: MaxScale = "auto",
    engine: Engine = "native",
) -> dict[int, PersistenceDiagram]:
    """Cross-barcodes of ``left`` relative to ``right`` for several dimensions.

    A single reduction up to ``max(dims)`` serves all requested dimensions.
    """
    if not dims:
        raise ValueError("at least one homology dimension is required")
    max_hom_dim = max(dims)
    cross = cross_distance_matrix(left, right)
    diagrams = _diagrams_of_matrix(
        cross, cross_vr_filtration, max_hom_dim, max_scale, engine
    )
    return {dim: diagrams[dim] for dim in dims}


def cross_barcode(
    left: PointCloud,
    right: PointCloud,
    dim: int,
    max_scale: MaxScale = "auto",
    engine: Engine = "native",
) -> PersistenceDiagram:
    """Cross-barcode of ``left`` relative to ``right`` in dimension ``dim``.

    The argument order matters: distances inside ``right`` are zeroed.
    """
    return cross_barcodes(left, right, (dim,), max_scale=max_scale, engine=engine)[dim]
