"""Training sets of cloud pairs and their cross-persistence densities."""

from __future__ import annotations

import logging
from functools import partial
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt

from crosspers.crossripsnet.training import CrnSample
from crosspers.datasets import circles
from crosspers.jobs import map_ordered
from crosspers.models.cloud import PointCloud
from crosspers.persistence import Engine, PersistenceDiagram, cross_barcode
from crosspers.stats import kde1d, mtd_samples
from crosspers.summaries import (
    DensityGrid,
    EmptyDatasetError,
    GridSpec,
    Weighting,
    diagram_bandwidth,
    expected_density,
)
from crosspers.utils import derive_seed, get_rng

logger = logging.getLogger(__name__)

CloudPair = tuple[PointCloud, PointCloud]


class DensityDatasetConfig(BaseModel):
    target: Literal["diagram", "mtd"] = Field(
        default="diagram",
        description="Expected cross-persistence density or 1-D MTD density.",
    )
    n_subsamples: PositiveInt = Field(
        default=16,
        description="Random subsample pairs per cloud pair.",
    )
    subsample_size: PositiveInt = Field(
        default=16,
        description="Points per subsample.",
    )
    hom_dim: NonNegativeInt = Field(default=1, le=2)
    resolution: PositiveInt = Field(
        default=20,
        description="Cells per grid axis.",
    )
    bandwidth: float | Literal["auto"] = Field(
        default="auto",
        description="Kernel bandwidth, auto uses Silverman's rule on pooled data.",
    )
    weighting: Weighting = "auto"
    seed: int = 0
    engine: Engine = "auto"
    n_jobs: NonNegativeInt = 1


def _subsample_diagrams(
    pair: CloudPair,
    config: DensityDatasetConfig,
    seed: int,
) -> list[PersistenceDiagram]:
    left, right = pair
    rng = get_rng(seed)
    diagrams = []
    for _ in range(config.n_subsamples):
        left_idx = rng.choice(left.n_points, config.subsample_size, replace=False)
        right_idx = rng.choice(right.n_points, config.subsample_size, replace=False)
        diagrams.append(
            cross_barcode(
                left.subsample(left_idx),
                right.subsample(right_idx),
                config.hom_dim,
                engine=config.engine,
            )
        )
    return diagrams


def _diagram_targets(
    pairs: Sequence[CloudPair], config: DensityDatasetConfig
) -> tuple[list[DensityGrid], GridSpec]:
    jobs = [
        partial(_subsample_diagrams, pair, config, derive_seed(config.seed, idx))
        for idx, pair in enumerate(pairs)
    ]
    per_pair = map_ordered(jobs, n_jobs=config.n_jobs, label="diagrams")
    pooled = [diagram for diagrams in per_pair for diagram in diagrams]
    bandwidth = (
        diagram_bandwidth(pooled) if config.bandwidth == "auto" else config.bandwidth
    )
    nx = 1 if config.hom_dim == 0 else config.resolution
    grid = GridSpec.from_diagrams(pooled, bandwidth, nx=nx, ny=config.resolution)
    targets = [
        expected_density(diagrams, grid, bandwidth, config.weighting, normalize=True)
        for diagrams in per_pair
    ]
    return targets, grid


def _mtd_targets(
    pairs: Sequence[CloudPair], config: DensityDatasetConfig
) -> tuple[list[DensityGrid], GridSpec]:
    samples = [
        mtd_samples(
            left,
            right,
            n_pairs=config.n_subsamples,
            subsample_size=config.subsample_size,
            hom_dim=config.hom_dim,
            seed=derive_seed(config.seed, idx),
            engine=config.engine,
            n_jobs=config.n_jobs,
            shared_indices=False,
        )
        for idx, (left, right) in enumerate(pairs)
    ]
    densities = [kde1d(values, bandwidth=config.bandwidth) for values in samples]
    widest = max(density.bandwidth for density in densities)
    grid = GridSpec.for_values(np.concatenate(samples), widest, config.resolution)
    centers = grid.x_centers()
    targets = [
        DensityGrid(
            spec=grid,
            values=density.evaluate(centers)[:, np.newaxis],
            bandwidth=density.bandwidth,
        ).normalized_copy()
        for density in densities
    ]
    return targets, grid


def build_density_dataset(
    pairs: Sequence[CloudPair],
    config: DensityDatasetConfig | None = None,
) -> tuple[list[CrnSample], GridSpec]:
    """Targets for every cloud pair on one frozen grid.

    Returns:
        tuple: Samples with normalized targets and the shared grid.

    Raises:
        EmptyDatasetError: If no pairs are given.
    """
    config = config or DensityDatasetConfig()
    if not pairs:
        raise EmptyDatasetError("no cloud pairs given")
    logger.info(
        "building %s targets for %d pairs, %d subsamples of %d points",
        config.target,
        len(pairs),
        config.n_subsamples,
        config.subsample_size,
    )
    match config.target:
        case "diagram":
            targets, grid = _diagram_targets(pairs, config)
        case "mtd":
            targets, grid = _mtd_targets(pairs, config)
    samples = [
        CrnSample(left=left, right=right, target=target)
        for (left, right), target in zip(pairs, targets, strict=True)
    ]
    return samples, grid


def synthetic_circle_pairs(
    n_pairs: int,
    n_points: int = 48,
    seed: int = 0,
    noise: float = 0.05,
) -> list[CloudPair]:
    """Pairs of clouds made of one, two or three circles.

    The number of circles of either cloud is drawn independently.
    """
    rng = get_rng(seed)
    pairs = []
    for idx in range(n_pairs):
        n_left, n_right = rng.integers(1, 4, size=2)
        pairs.append(
            (
                circles(n_points, int(n_left), seed=derive_seed(seed, idx, 0), noise=noise),
                circles(n_points, int(n_right), seed=derive_seed(seed, idx, 1), noise=noise),
            )
        )
    return pairs
