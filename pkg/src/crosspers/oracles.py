"""Slow reference computations for small inputs.

Everything here avoids the column reduction: persistence pairs are read off
ranks of boundary matrices over GF(2) at every pair of sublevel values.
"""

from __future__ import annotations

from collections import Counter
from itertools import combinations
from typing import Iterable

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import norm

from crosspers.filtration import Filtration, Simplex, boundary_faces


def gf2_rank(columns: Iterable[int]) -> int:
    """Rank over GF(2) of columns given as integer bit masks."""
    basis: dict[int, int] = {}
    for column in columns:
        while column:
            pivot = column.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = column
                break
            column ^= basis[pivot]
    return len(basis)


class BoundaryOracle:
    """Persistent Betti numbers of a filtration from boundary ranks."""

    def __init__(self, filt: Filtration) -> None:
        self.filt = filt
        self.values = sorted(set(filt.values.tolist()))
        self._value = dict(zip(filt.simplices, filt.values.tolist(), strict=True))

    def _simplices(self, dim: int, threshold: float) -> list[Simplex]:
        return [
            s for s, v in self._value.items() if len(s) - 1 == dim and v <= threshold
        ]

    def _columns(
        self, dim: int, threshold: float, rows: list[Simplex]
    ) -> list[int]:
        index = {face: bit for bit, face in enumerate(rows)}
        columns = []
        for simplex in self._simplices(dim, threshold):
            mask = 0
            for face in boundary_faces(simplex):
                if face in index:
                    mask |= 1 << index[face]
            columns.append(mask)
        return columns

    def betti(self, dim: int, threshold: float) -> int:
        return self.persistent_betti(dim, threshold, threshold)

    def persistent_betti(self, dim: int, birth: float, death: float) -> int:
        """Rank of ``H_dim(K_birth) -> H_dim(K_death)``, ``birth <= death``.

        A threshold of ``-inf`` stands for the empty complex.
        """
        cycles_rows = self._simplices(dim - 1, birth) if dim > 0 else []
        n_chains = len(self._simplices(dim, birth))
        rank_cycles = gf2_rank(self._columns(dim, birth, cycles_rows)) if dim > 0 else 0

        rows_b = self._simplices(dim, death)
        inside = {s for s in rows_b if self._value[s] <= birth}
        boundaries = self._columns(dim + 1, death, rows_b)
        outside_mask = sum(1 << bit for bit, s in enumerate(rows_b) if s not in inside)
        rank_all = gf2_rank(boundaries)
        rank_outside = gf2_rank(column & outside_mask for column in boundaries)
        return n_chains - rank_cycles - (rank_all - rank_outside)

    def pairs(self, dim: int) -> Counter[tuple[float, float]]:
        """Multiset of positive-length and essential pairs by inclusion-exclusion."""
        values = [-np.inf, *self.values]
        last = values[-1]
        pairs: Counter[tuple[float, float]] = Counter()
        for i in range(1, len(values)):
            for j in range(i + 1, len(values)):
                multiplicity = (
                    self.persistent_betti(dim, values[i], values[j - 1])
                    - self.persistent_betti(dim, values[i], values[j])
                    - self.persistent_betti(dim, values[i - 1], values[j - 1])
                    + self.persistent_betti(dim, values[i - 1], values[j])
                )
                if multiplicity:
                    pairs[(values[i], values[j])] += multiplicity
            essential = self.persistent_betti(dim, values[i], last) - self.persistent_betti(
                dim, values[i - 1], last
            )
            if essential:
                pairs[(values[i], np.inf)] += essential
        return pairs


def flag_subsets(
    entries: np.ndarray, max_dim: int, max_scale: float
) -> dict[Simplex, float]:
    """All vertex subsets up to ``max_dim + 2`` vertices with their diameter."""
    n_vertices = entries.shape[0]
    values: dict[Simplex, float] = {}
    for size in range(1, max_dim + 3):
        for simplex in combinations(range(n_vertices), size):
            value = max(
                (float(entries[i, j]) for i, j in combinations(simplex, 2)),
                default=0.0,
            )
            if value <= max_scale:
                values[simplex] = value
    return values


def cross_filtering_value(
    left: np.ndarray, right: np.ndarray, simplex: Simplex
) -> float:
    """Largest distance between a vertex of ``simplex`` and one of its left vertices.

    Vertices below ``len(left)`` are left points. Simplices without a left
    vertex get 0.
    """
    union = np.vstack((left, right))
    raw = squareform(pdist(union)) if union.shape[0] > 1 else np.zeros((1, 1))
    left_vertices = [v for v in simplex if v < left.shape[0]]
    if not left_vertices:
        return 0.0
    return max(float(raw[i, j]) for i in simplex for j in left_vertices)


def auc_pairwise(scores: np.ndarray, labels: np.ndarray) -> float:
    """ROC-AUC by counting every positive/negative pair, ties count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    positives, negatives = scores[labels], scores[~labels]
    wins = 0.0
    for p in positives:
        for n in negatives:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (positives.size * negatives.size)


def gaussian_overlap(mean_a: float, mean_b: float, std: float = 1.0) -> float:
    """Overlap of two normal densities with a common standard deviation."""
    return float(2.0 * norm.cdf(-abs(mean_a - mean_b) / (2.0 * std)))
