"""Flag filtrations of distance matrices.

Both the Vietoris-Rips filtration and the cross filtration are flag
filtrations: a simplex enters at the largest matrix entry between its
vertices. On a cross matrix the entries inside the right block are zero, so a
simplex touching the left block gets the largest distance involving a left
point and a simplex inside the right block enters at 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal

import numpy as np

from crosspers.geometry import enclosing_radius
from crosspers.models.cloud import CrossDistanceMatrix, DistanceMatrix
from crosspers.utils import as_readonly, format_float, log_call

logger = logging.getLogger(__name__)

Simplex = tuple[int, ...]
MaxScale = float | Literal["auto", "max"]


@dataclass(frozen=True, slots=True)
class Filtration:
    """Simplices with their filtration values.

    Simplices are stored as strictly increasing vertex tuples. Filtrations
    built by this module are sorted by ``(value, dim, vertices)``.

    Attributes:
        simplices: Vertex tuples.
        values: Filtration value of every simplex.
        max_dim: Highest homology dimension the filtration supports, simplices
            go up to ``max_dim + 1``.
        max_scale: Largest admitted value.
    """

    simplices: tuple[Simplex, ...]
    values: np.ndarray
    max_dim: int
    max_scale: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.simplices),):
            raise ValueError("one value per simplex is required")
        object.__setattr__(self, "values", as_readonly(values))

    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self) -> Iterator[tuple[Simplex, float]]:
        for simplex, value in zip(self.simplices, self.values, strict=True):
            yield simplex, float(value)

    @property
    def dims(self) -> np.ndarray:
        return np.fromiter((len(s) - 1 for s in self.simplices), dtype=int)

    def count(self, dim: int) -> int:
        return sum(1 for s in self.simplices if len(s) - 1 == dim)

    def sort_keys(self) -> list[tuple[float, int, Simplex]]:
        return [(value, len(s) - 1, s) for s, value in self]

    def is_sorted(self) -> bool:
        keys = self.sort_keys()
        return all(a <= b for a, b in zip(keys, keys[1:]))

    def faces_precede(self) -> bool:
        """Whether every face is listed before its coface with a smaller value."""
        position = {simplex: idx for idx, simplex in enumerate(self.simplices)}
        for idx, (simplex, value) in enumerate(self):
            if len(simplex) == 1:
                continue
            for face in boundary_faces(simplex):
                face_idx = position.get(face)
                if face_idx is None or face_idx >= idx:
                    return False
                if self.values[face_idx] > value:
                    return False
        return True

    def to_csv(self, file: Path) -> None:
        """Dump as ``value,dim,vertices`` rows, vertices joined by semicolons."""
        logger.info("writing filtration with %d simplices to %s", len(self), file)
        lines = ["value,dim,vertices\n"]
        lines.extend(
            f"{format_float(value)},{len(s) - 1},{';'.join(map(str, s))}\n"
            for s, value in self
        )
        file.write_text("".join(lines))


def boundary_faces(simplex: Simplex) -> Iterator[Simplex]:
    for skip in range(len(simplex)):
        yield simplex[:skip] + simplex[skip + 1 :]


def resolve_max_scale(entries: np.ndarray, max_scale: MaxScale) -> float:
    """Resolve ``auto`` to the enclosing radius and ``max`` to the largest entry."""
    match max_scale:
        case "auto":
            return enclosing_radius(entries)
        case "max":
            return float(np.max(entries, initial=0.0))
        case float() | int():
            if max_scale <= 0.0:
                raise ValueError(f"max_scale must be > 0, got {max_scale}")
            return float(max_scale)
        case _:
            raise ValueError(f"invalid max_scale {max_scale!r}")


@log_call
def flag_filtration(entries: np.ndarray, max_dim: int, max_scale: float) -> Filtration:
    """Clique expansion of the threshold graph up to dimension ``max_dim + 1``.

    Args:
        entries: Symmetric matrix of edge values.
        max_dim: Highest homology dimension of interest.
        max_scale: Edges with a larger value are omitted.

    Returns:
        Filtration: Sorted flag filtration.
    """
    if max_dim < 0:
        raise ValueError(f"max_dim must be >= 0, got {max_dim}")
    entries = np.asarray(entries, dtype=float)
    n_vertices = entries.shape[0]
    upper = np.triu(entries <= max_scale, k=1)

    keyed: list[tuple[float, int, Simplex]] = [(0.0, 0, (v,)) for v in range(n_vertices)]
    layer: list[tuple[Simplex, float]] = []
    rows, cols = np.nonzero(upper)
    for i, j in zip(rows.tolist(), cols.tolist(), strict=True):
        value = float(entries[i, j])
        layer.append(((i, j), value))
        keyed.append((value, 1, (i, j)))

    for dim in range(2, max_dim + 2):
        next_layer: list[tuple[Simplex, float]] = []
        for simplex, value in layer:
            common = np.logical_and.reduce(upper[list(simplex)])
            candidates = np.flatnonzero(common)
            if candidates.size == 0:
                continue
            extension = entries[np.ix_(simplex, candidates)].max(axis=0)
            for vertex, ext_value in zip(
                candidates.tolist(), extension.tolist(), strict=True
            ):
                coface = (*simplex, vertex)
                coface_value = max(value, ext_value)
                next_layer.append((coface, coface_value))
                keyed.append((coface_value, dim, coface))
        layer = next_layer

    # (value, dim, vertices) puts every face before its cofaces
    keyed.sort()
    logger.debug(
        "flag filtration: %d vertices, %d simplices up to dim %d, max scale %g",
        n_vertices,
        len(keyed),
        max_dim + 1,
        max_scale,
    )
    return Filtration(
        simplices=tuple(simplex for _, _, simplex in keyed),
        values=np.fromiter((value for value, _, _ in keyed), dtype=float, count=len(keyed)),
        max_dim=max_dim,
        max_scale=max_scale,
    )


def vr_filtration(
    dist: DistanceMatrix,
    max_dim: int,
    max_scale: MaxScale = "auto",
) -> Filtration:
    """Vietoris-Rips filtration, the value of a simplex is its diameter."""
    scale = resolve_max_scale(dist.entries, max_scale)
    return flag_filtration(dist.entries, max_dim, scale)


def cross_vr_filtration(
    cross: CrossDistanceMatrix,
    max_dim: int,
    max_scale: MaxScale = "auto",
) -> Filtration:
    """Cross filtration of two clouds.

    A simplex with at least one left vertex enters at the largest distance
    between its vertices that involves a left vertex; simplices inside the
    right block and all vertices enter at 0.

    ``auto`` resolves to the enclosing radius. From that scale on one vertex
    is adjacent to all others, the complex is a cone and no further
    positive-length pair can appear, so diagrams match the ``max`` scale.
    """
    scale = resolve_max_scale(cross.entries, max_scale)
    return flag_filtration(cross.entries, max_dim, scale)
