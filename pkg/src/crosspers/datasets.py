"""Synthetic point clouds and time series."""

from __future__ import annotations

import numpy as np

from crosspers.models.cloud import PointCloud, TimeSeries
from crosspers.utils import get_rng

SHAPE_CLASSES = ("circle", "two_circles", "blob", "three_blobs")


def circles(
    n_points: int,
    n_circles: int = 1,
    seed: int = 0,
    radius: float = 1.0,
    noise: float = 0.0,
    spacing: float = 3.0,
) -> PointCloud:
    """Points spread evenly over ``n_circles`` circles placed along the x axis.

    Angles are uniform, ``noise`` is the std of isotropic Gaussian jitter.
    """
    if n_circles < 1 or n_points < n_circles:
        raise ValueError("need at least one point per circle")
    rng = get_rng(seed)
    assignment = np.arange(n_points) % n_circles
    angles = rng.uniform(0.0, 2.0 * np.pi, n_points)
    centers = np.column_stack(
        (spacing * radius * assignment, np.zeros(n_points))
    )
    points = centers + radius * np.column_stack((np.cos(angles), np.sin(angles)))
    if noise:
        points += rng.normal(0.0, noise, points.shape)
    return PointCloud(points)


def two_circles(n_points: int, seed: int = 0, noise: float = 0.0) -> PointCloud:
    return circles(n_points, 2, seed=seed, noise=noise)


def blobs(
    n_points: int,
    n_blobs: int = 1,
    seed: int = 0,
    std: float = 0.3,
    spacing: float = 3.0,
) -> PointCloud:
    rng = get_rng(seed)
    assignment = np.arange(n_points) % n_blobs
    centers = np.column_stack((spacing * assignment, np.zeros(n_points)))
    return PointCloud(centers + rng.normal(0.0, std, (n_points, 2)))


def shape(name: str, n_points: int, seed: int = 0, noise: float = 0.05) -> PointCloud:
    match name:
        case "circle":
            return circles(n_points, 1, seed=seed, noise=noise)
        case "two_circles":
            return circles(n_points, 2, seed=seed, noise=noise)
        case "blob":
            return blobs(n_points, 1, seed=seed)
        case "three_blobs":
            return blobs(n_points, 3, seed=seed)
    raise ValueError(f"unknown shape {name!r}, choose from {', '.join(SHAPE_CLASSES)}")


def shape_dataset(n_points: int, seed: int = 0) -> dict[str, PointCloud]:
    """One cloud per class of :data:`SHAPE_CLASSES`."""
    return {
        name: shape(name, n_points, seed=seed + idx)
        for idx, name in enumerate(SHAPE_CLASSES)
    }


def sinusoid(length: int, period: float, amplitude: float = 1.0) -> TimeSeries:
    return TimeSeries(amplitude * np.sin(2.0 * np.pi * np.arange(length) / period))


def chirp(
    length: int,
    rng: np.random.Generator,
    noise: float = 1.0,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Damped chirp with rising frequency at a random position, plus noise."""
    t = np.linspace(0.0, 1.0, length)
    t0 = rng.uniform(0.3, 0.7)
    f0, f1 = rng.uniform(4.0, 8.0), rng.uniform(20.0, 40.0)
    tau = t - t0
    frequency = f0 + (f1 - f0) * np.clip(tau + 0.3, 0.0, None)
    envelope = np.exp(-((tau / 0.15) ** 2))
    signal = amplitude * envelope * np.sin(2.0 * np.pi * frequency * tau)
    return signal + rng.normal(0.0, noise, length)


def chirp_dataset(
    n_series: int,
    length: int = 256,
    seed: int = 0,
    noise: float = 0.6,
) -> tuple[list[TimeSeries], np.ndarray]:
    """Balanced chirp-plus-noise (label 1) versus pure-noise (label 0) series."""
    rng = get_rng(seed)
    labels = np.arange(n_series) % 2
    rng.shuffle(labels)
    series = [
        TimeSeries(
            chirp(length, rng, noise=noise)
            if label
            else rng.normal(0.0, noise, length),
            label=str(label),
        )
        for label in labels
    ]
    return series, labels
