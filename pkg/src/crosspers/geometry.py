"""Distance matrices, noise injection, delay embeddings and PCA."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import eigh
from scipy.spatial.distance import pdist, squareform

from crosspers.models.cloud import (
    CrossDistanceMatrix,
    DistanceMatrix,
    PointCloud,
    SeriesTooShortError,
    TimeSeries,
    check_same_dim,
)
from crosspers.utils import as_readonly, get_rng

logger = logging.getLogger(__name__)

EigenSolver = Literal["eigh", "jacobi"]


def pairwise_distances(cloud: PointCloud) -> DistanceMatrix:
    if cloud.n_points == 1:
        return DistanceMatrix(np.zeros((1, 1)))
    return DistanceMatrix(squareform(pdist(cloud.points)))


def cross_distance_matrix(left: PointCloud, right: PointCloud) -> CrossDistanceMatrix:
    """Distances of ``left`` followed by ``right`` with the right block zeroed.

    Raises:
        DimensionMismatchError: If the clouds live in different dimensions.
    """
    check_same_dim(left, right)
    union = np.vstack((left.points, right.points))
    entries = squareform(pdist(union))
    entries[left.n_points :, left.n_points :] = 0.0
    return CrossDistanceMatrix(entries, n_left=left.n_points, n_right=right.n_points)


def enclosing_radius(entries: np.ndarray) -> float:
    """Smallest radius at which one vertex is connected to all others."""
    entries = np.asarray(entries)
    if entries.shape[0] <= 1:
        return 0.0
    return float(entries.max(axis=1).min())


def inject_noise(cloud: PointCloud, relative_norm: float, seed: int) -> PointCloud:
    """Add Gaussian noise scaled per point to ``relative_norm * |x_i|``.

    Points at the origin receive noise of absolute norm
    ``relative_norm * mean(|x|)``. The generator is PCG64 seeded with ``seed``.

    Args:
        cloud: Input cloud.
        relative_norm: Ratio of noise norm to point norm, >= 0.
        seed: 64 bit seed.

    Returns:
        PointCloud: The noised cloud, identical to the input for a zero norm.
        A cloud with every point at the origin has a zero mean norm and is
        returned unchanged as well.
    """
    if relative_norm < 0.0:
        raise ValueError(f"relative_norm must be >= 0, got {relative_norm}")
    if relative_norm == 0.0:
        return PointCloud(cloud.points)

    rng = get_rng(seed)
    noise = rng.standard_normal(cloud.points.shape)
    noise_norms = np.linalg.norm(noise, axis=1)
    noise_norms[noise_norms == 0.0] = 1.0

    point_norms = cloud.norms()
    if not np.any(point_norms):
        logger.warning("all %d points lie at the origin, no noise injected", cloud.n_points)
        return PointCloud(cloud.points)
    target = relative_norm * point_norms
    zero_points = point_norms == 0.0
    if np.any(zero_points):
        logger.debug(
            "%d points at the origin receive absolute noise", zero_points.sum()
        )
        target[zero_points] = relative_norm * point_norms.mean()

    noise *= (target / noise_norms)[:, np.newaxis]
    return PointCloud(cloud.points + noise)


def time_delay_embedding(
    series: TimeSeries,
    embedding_dim: int,
    delay: int = 1,
) -> PointCloud:
    """Sliding window embedding ``(v_k, v_{k+delay}, ...)`` of a series.

    Raises:
        SeriesTooShortError: If fewer than ``(embedding_dim - 1) * delay + 1``
            samples are available.
    """
    if embedding_dim < 1 or delay < 1:
        raise ValueError("embedding_dim and delay must be >= 1")
    window = (embedding_dim - 1) * delay + 1
    if series.length < window:
        raise SeriesTooShortError(
            f"series of length {series.length} is too short for "
            f"embedding_dim={embedding_dim}, delay={delay} (needs {window})"
        )
    windows = sliding_window_view(series.values, window)[:, ::delay]
    return PointCloud(windows)


def jacobi_eigh(
    matrix: np.ndarray,
    tolerance: float = 1e-12,
    max_sweeps: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Pivots are visited row by row in the upper triangle. Results are ordered
    and signed like :func:`sorted_eigensystem`.

    Returns:
        tuple[np.ndarray, np.ndarray]: Eigenvalues and column eigenvectors.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if not np.allclose(a, a.T):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    vectors = np.eye(n)
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)

    for sweep in range(max_sweeps):
        off_diagonal = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off_diagonal <= tolerance * scale:
            logger.debug("jacobi converged after %d sweeps", sweep)
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
                vectors[:, p] = c * vec_p - s * vec_q
                vectors[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("jacobi did not converge in %d sweeps", max_sweeps)

    return sorted_eigensystem(np.diag(a).copy(), vectors)


def sorted_eigensystem(
    values: np.ndarray, vectors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Order eigenpairs by descending eigenvalue and fix the sign.

    The largest-magnitude coordinate of every eigenvector is made positive.
    """
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order].copy()
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return values, vectors * signs


@dataclass(frozen=True, slots=True)
class PcaProjection:
    """Frozen PCA fit: sample mean and the leading principal axes."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform_array(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        if data.shape[-1] != self.mean.size:
            raise ValueError(
                f"data dimension {data.shape[-1]} does not match "
                f"the fitted dimension {self.mean.size}"
            )
        return (data - self.mean) @ self.components

    def transform(self, cloud: PointCloud) -> PointCloud:
        return PointCloud(self.transform_array(cloud.points))


def fit_pca_array(
    data: np.ndarray,
    n_components: int,
    solver: EigenSolver = "eigh",
) -> PcaProjection:
    data = np.asarray(data, dtype=float)
    n_samples, dim = data.shape
    if not 1 <= n_components <= dim:
        raise ValueError(
            f"number of components must be within [1, {dim}], got {n_components}"
        )
    mean = data.mean(axis=0)
    centered = data - mean
    covariance = centered.T @ centered / max(n_samples - 1, 1)

    match solver:
        case "eigh":
            values, vectors = sorted_eigensystem(*eigh(covariance))
        case "jacobi":
            values, vectors = jacobi_eigh(covariance)
        case _:
            raise ValueError(f"unknown eigen solver {solver!r}")

    return PcaProjection(
        mean=as_readonly(mean),
        components=as_readonly(vectors[:, :n_components]),
        explained_variance=as_readonly(values[:n_components]),
    )


def fit_pca(cloud: PointCloud, k: int, solver: EigenSolver = "eigh") -> PcaProjection:
    return fit_pca_array(cloud.points, k, solver=solver)


def pca_reduce(cloud: PointCloud, k: int, solver: EigenSolver = "eigh") -> PointCloud:
    """Project the centred cloud onto its ``k`` leading principal axes.

    Raises:
        ValueError: If ``k`` exceeds the point dimension.
    """
    return fit_pca(cloud, k, solver=solver).transform(cloud)
