"""MTD densities, the overlap functional and the distinction pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, model_validator
from scipy.integrate import trapezoid
from typing_extensions import Self

from crosspers import __version__
from crosspers.geometry import inject_noise
from crosspers.jobs import map_ordered
from crosspers.kernels import gaussian, silverman_bandwidth
from crosspers.models.cloud import PointCloud
from crosspers.persistence import Engine, PersistenceDiagram, cross_barcode
from crosspers.summaries import mtd
from crosspers.utils import as_readonly, derive_seed, get_rng, log_call

__all__ = [
    "DistinctionConfig",
    "DistinctionReport",
    "PropertyReport",
    "ScalarDensity",
    "SweepConfig",
    "SweepTable",
    "distinguish",
    "kde1d",
    "kde_grid",
    "mtd_density",
    "mtd_samples",
    "noise_sensitivity_sweep",
    "overlap",
    "overlap_lipschitz_check",
    "silverman_bandwidth",
    "tv_pushforward_check",
]

logger = logging.getLogger(__name__)

KDE_GRID_POINTS = 2048
KDE_MAX_GRID_POINTS = 1 << 16
KDE_MAX_SPACING = 0.25
KDE_LOCAL_REACH = 6.0
KDE_LOCAL_POINTS = 49
KDE_BLOCK_SIZE = 1 << 21
SNAP_TOLERANCE = 1e-12

Regime = Literal["right_only", "both"]
Decision = Literal["same", "different"]


@dataclass(frozen=True, slots=True)
class ScalarDensity:
    """Gaussian kernel density estimate tabulated on a sorted grid.

    The tabulated values integrate to 1 under the trapezoid rule. Evaluation
    between grid points interpolates linearly and is zero outside the grid.
    """

    samples: np.ndarray
    bandwidth: float
    grid: np.ndarray
    values: np.ndarray

    @property
    def z_min(self) -> float:
        return float(self.grid[0])

    @property
    def z_max(self) -> float:
        return float(self.grid[-1])

    @property
    def nz(self) -> int:
        return self.grid.size

    def __call__(self, z: np.ndarray | float) -> np.ndarray:
        return np.interp(z, self.grid, self.values, left=0.0, right=0.0)

    def mass(self) -> float:
        return float(trapezoid(self.values, self.grid))

    def mean(self) -> float:
        return float(trapezoid(self.grid * self.values, self.grid))

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Exact kernel sum at ``z`` without the tabulation."""
        return _kernel_sum(self.samples, np.asarray(z, dtype=float), self.bandwidth)


def _kernel_sum(samples: np.ndarray, z: np.ndarray, bandwidth: float) -> np.ndarray:
    values = np.zeros_like(z, dtype=float)
    step = max(1, KDE_BLOCK_SIZE // max(z.size, 1))
    for start in range(0, samples.size, step):
        chunk = samples[start : start + step]
        values += gaussian(z[:, np.newaxis] - chunk, bandwidth).sum(axis=1)
    return values / samples.size


def kde_grid(
    samples: np.ndarray,
    bandwidth: float,
    n_grid: int = KDE_GRID_POINTS,
) -> np.ndarray:
    """Tabulation grid on ``[min - 3h, max + 3h]`` with spacing at most ``h / 4``.

    A regular grid is refined past ``n_grid`` points up to ``KDE_MAX_GRID_POINTS``.
    Beyond that the grid is the union of local windows of ``+-6h`` around every
    distinct sample.
    """
    lower = samples.min() - 3.0 * bandwidth
    upper = samples.max() + 3.0 * bandwidth
    needed = int(np.ceil((upper - lower) / (KDE_MAX_SPACING * bandwidth))) + 1
    if needed <= max(n_grid, KDE_MAX_GRID_POINTS):
        return np.linspace(lower, upper, max(n_grid, needed))

    offsets = np.linspace(-KDE_LOCAL_REACH, KDE_LOCAL_REACH, KDE_LOCAL_POINTS) * bandwidth
    local = (np.unique(samples)[:, np.newaxis] + offsets).ravel()
    grid = np.union1d(np.clip(local, lower, upper), [lower, upper])
    logger.debug(
        "bandwidth %.3g is tiny against the sample range %.3g, using %d local grid points",
        bandwidth,
        upper - lower,
        grid.size,
    )
    return grid


def kde1d(
    samples: Sequence[float] | np.ndarray,
    bandwidth: float | Literal["auto"] = "auto",
    n_grid: int = KDE_GRID_POINTS,
) -> ScalarDensity:
    """Gaussian KDE on ``[min - 3h, max + 3h]``.

    Args:
        samples: At least two scalar samples.
        bandwidth: Kernel standard deviation, ``auto`` uses Silverman's rule.
        n_grid: Minimum number of tabulation points, see :func:`kde_grid`.

    Raises:
        ValueError: For fewer than two samples or a non-positive bandwidth.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise ValueError(f"kde needs at least 2 samples, got {samples.size}")
    if bandwidth == "auto":
        bandwidth = silverman_bandwidth(samples)
    elif bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")

    grid = kde_grid(samples, bandwidth, n_grid)
    values = _kernel_sum(samples, grid, bandwidth)
    values /= trapezoid(values, grid)
    return ScalarDensity(
        samples=as_readonly(samples),
        bandwidth=float(bandwidth),
        grid=as_readonly(grid),
        values=as_readonly(values),
    )


def overlap_on_grid(p: np.ndarray, q: np.ndarray, z: np.ndarray) -> float:
    """Trapezoid integral of ``min(p, q)`` on the grid ``z``."""
    return float(trapezoid(np.minimum(p, q), z))


def overlap(p: ScalarDensity, q: ScalarDensity) -> float:
    """Overlap ``integral of min(p, q)`` of two densities, within ``[0, 1]``.

    Both densities are evaluated on the union of their grids and renormalized
    there before integration.
    """
    z = np.union1d(p.grid, q.grid)
    p_values, q_values = p(z), q(z)
    for values in (p_values, q_values):
        mass = trapezoid(values, z)
        if mass > 0.0:
            values /= mass
    result = float(np.clip(overlap_on_grid(p_values, q_values, z), 0.0, 1.0))
    if result < SNAP_TOLERANCE:
        return 0.0
    if result > 1.0 - SNAP_TOLERANCE:
        return 1.0
    return result


def _mtd_job(
    core: PointCloud,
    other: PointCloud,
    core_idx: np.ndarray,
    other_idx: np.ndarray,
    hom_dim: int,
    engine: Engine,
) -> float:
    diagram = cross_barcode(
        core.subsample(core_idx),
        other.subsample(other_idx),
        hom_dim,
        engine=engine,
    )
    return mtd(diagram)


@log_call
def mtd_samples(
    core: PointCloud,
    other: PointCloud,
    n_pairs: int,
    subsample_size: int,
    hom_dim: int,
    seed: int,
    engine: Engine = "auto",
    n_jobs: int = 1,
    shared_indices: bool | None = None,
) -> np.ndarray:
    """MTD of cross-barcodes between random subsamples of two clouds.

    Each pair draws ``subsample_size`` points without replacement from both
    clouds, the core subsample is always the left argument. All index draws
    happen upfront from one PCG64 stream, results are ordered by pair index.

    Args:
        core: Left cloud.
        other: Right cloud.
        n_pairs: Number of subsample pairs.
        subsample_size: Points per subsample.
        hom_dim: Homology dimension of the cross-barcode.
        seed: Seed of the index draws.
        engine: Persistence engine.
        n_jobs: Concurrent workers, 0 for all CPUs.
        shared_indices: Reuse the core indices for ``other``. ``None`` shares
            them when ``other`` is ``core``.

    Returns:
        np.ndarray: ``n_pairs`` MTD values.
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    if subsample_size < 1:
        raise ValueError(f"subsample_size must be >= 1, got {subsample_size}")
    if subsample_size > min(core.n_points, other.n_points):
        raise ValueError(
            f"subsample size {subsample_size} exceeds the cloud sizes "
            f"({core.n_points}, {other.n_points})"
        )
    if shared_indices is None:
        shared_indices = other is core
    if shared_indices and core.n_points != other.n_points:
        raise ValueError("shared subsample indices need clouds of equal size")

    rng = get_rng(seed)
    draws = []
    for _ in range(n_pairs):
        core_idx = rng.choice(core.n_points, size=subsample_size, replace=False)
        other_idx = (
            core_idx
            if shared_indices
            else rng.choice(other.n_points, size=subsample_size, replace=False)
        )
        draws.append((core_idx, other_idx))

    jobs = [
        partial(_mtd_job, core, other, core_idx, other_idx, hom_dim, engine)
        for core_idx, other_idx in draws
    ]
    return np.array(map_ordered(jobs, n_jobs=n_jobs, label="mtd"), dtype=float)


def mtd_density(
    core: PointCloud,
    other: PointCloud,
    n_pairs: int,
    subsample_size: int,
    hom_dim: int,
    seed: int,
    bandwidth: float | Literal["auto"] = "auto",
    engine: Engine = "auto",
    n_jobs: int = 1,
    shared_indices: bool | None = None,
) -> ScalarDensity:
    """KDE of :func:`mtd_samples`."""
    if n_pairs < 2:
        raise ValueError(f"n_pairs must be >= 2 for a density, got {n_pairs}")
    samples = mtd_samples(
        core,
        other,
        n_pairs=n_pairs,
        subsample_size=subsample_size,
        hom_dim=hom_dim,
        seed=seed,
        engine=engine,
        n_jobs=n_jobs,
        shared_indices=shared_indices,
    )
    return kde1d(samples, bandwidth=bandwidth)


class DistinctionConfig(BaseModel):
    n_pairs: int = Field(
        default=100,
        ge=2,
        description="Number of random subsample pairs per MTD density.",
    )
    subsample_size: PositiveInt = Field(
        default=128,
        description="Number of points drawn from each cloud per pair.",
    )
    hom_dim: NonNegativeInt = Field(
        default=1,
        le=2,
        description="Homology dimension of the cross-barcodes.",
    )
    seed: int = Field(default=0, description="Seed of all random draws.")
    threshold: float = Field(
        default=0.05,
        ge=0.0,
        le=1.0,
        description="Clouds are reported different if the overlap is below.",
    )
    bandwidth: float | Literal["auto"] = Field(
        default="auto",
        description="KDE bandwidth of the MTD densities, auto uses Silverman.",
    )
    engine: Engine = Field(
        default="auto",
        description="Persistence engine. auto uses ripser for larger clouds "
        "when it is installed.",
    )
    n_jobs: NonNegativeInt = Field(
        default=1,
        description="Concurrent subsample jobs, 0 uses all CPUs.",
    )

    def density(
        self,
        core: PointCloud,
        other: PointCloud,
        seed: int,
    ) -> tuple[np.ndarray, ScalarDensity]:
        samples = mtd_samples(
            core,
            other,
            n_pairs=self.n_pairs,
            subsample_size=self.subsample_size,
            hom_dim=self.hom_dim,
            seed=seed,
            engine=self.engine,
            n_jobs=self.n_jobs,
            shared_indices=False,
        )
        return samples, kde1d(samples, bandwidth=self.bandwidth)

    def self_seed(self) -> int:
        return derive_seed(self.seed, 0)

    def cross_seed(self) -> int:
        return derive_seed(self.seed, 1)


class DistinctionReport(BaseModel):
    overlap: float = Field(ge=0.0, le=1.0)
    threshold: float
    decision: Decision
    core_samples: list[float]
    candidate_samples: list[float]
    config: DistinctionConfig
    version: str = __version__

    @model_validator(mode="after")
    def _check_decision(self) -> Self:
        expected = "different" if self.overlap < self.threshold else "same"
        if self.decision != expected:
            raise ValueError(
                f"decision {self.decision!r} contradicts overlap {self.overlap} "
                f"and threshold {self.threshold}"
            )
        return self


def decide(overlap_value: float, threshold: float) -> Decision:
    return "different" if overlap_value < threshold else "same"


def distinguish(
    core: PointCloud,
    candidate: PointCloud,
    config: DistinctionConfig | None = None,
) -> tuple[DistinctionReport, ScalarDensity, ScalarDensity]:
    """Compare the self MTD density of ``core`` with its cross density.

    Returns:
        tuple: The report, the self density and the cross density.
    """
    config = config or DistinctionConfig()
    logger.info(
        "distinguishing %d vs %d points, %d pairs of %d points, H%d",
        core.n_points,
        candidate.n_points,
        config.n_pairs,
        config.subsample_size,
        config.hom_dim,
    )
    self_samples, self_density = config.density(core, core, config.self_seed())
    cross_samples, cross_density = config.density(
        core, candidate, config.cross_seed()
    )
    value = overlap(self_density, cross_density)
    decision = decide(value, config.threshold)
    logger.info("overlap %.4f, decision: %s", value, decision)
    report = DistinctionReport(
        overlap=value,
        threshold=config.threshold,
        decision=decision,
        core_samples=self_samples.tolist(),
        candidate_samples=cross_samples.tolist(),
        config=config,
    )
    return report, self_density, cross_density


class SweepConfig(DistinctionConfig):
    levels: list[float] = Field(
        default=[0.0, 0.25, 0.5, 0.75],
        min_length=1,
        description="Relative noise norms.",
    )
    regime: Regime = Field(
        default="right_only",
        description="right_only noises the right argument, both noises both.",
    )

    def distinction(self) -> DistinctionConfig:
        return DistinctionConfig.model_validate(
            self.model_dump(exclude={"levels", "regime"})
        )


class PairOverlap(BaseModel):
    core: int
    candidate: int
    overlap: float
    self_std: float
    cross_std: float


class SweepRow(BaseModel):
    level: float
    regime: Regime
    mean_overlap: float
    pairs: list[PairOverlap]


class SweepTable(BaseModel):
    rows: list[SweepRow]
    config: SweepConfig
    version: str = __version__

    def mean_overlaps(self) -> dict[float, float]:
        return {row.level: row.mean_overlap for row in self.rows}


def noise_sensitivity_sweep(
    clouds: Sequence[PointCloud],
    levels: Sequence[float] | None = None,
    regime: Regime | None = None,
    config: SweepConfig | None = None,
) -> SweepTable:
    """Mean inter-class overlap per noise level.

    For every ordered pair of distinct clouds the self density of the core is
    compared with its cross density. ``right_only`` noises the right argument
    of both densities, ``both`` noises left and right. Level 0 reproduces
    :func:`distinguish`.
    """
    config = config or SweepConfig()
    updates = {}
    if levels is not None:
        updates["levels"] = list(levels)
    if regime is not None:
        updates["regime"] = regime
    if updates:
        config = SweepConfig.model_validate(config.model_dump() | updates)
    if len(clouds) < 2:
        raise ValueError("the sweep needs at least two clouds")
    distinction = config.distinction()
    rows = []
    for level_idx, level in enumerate(config.levels):

        def noised(cloud_idx: int, role: int, level=level, level_idx=level_idx):
            seed = derive_seed(config.seed, 2, level_idx, cloud_idx, role)
            return inject_noise(clouds[cloud_idx], level, seed)

        right = [noised(idx, 0) for idx in range(len(clouds))]
        left = (
            [noised(idx, 1) for idx in range(len(clouds))]
            if config.regime == "both"
            else list(clouds)
        )

        self_densities = [
            distinction.density(left[idx], right[idx], distinction.self_seed())
            for idx in range(len(clouds))
        ]
        pairs = []
        for core_idx in range(len(clouds)):
            self_samples, self_density = self_densities[core_idx]
            for cand_idx in range(len(clouds)):
                if cand_idx == core_idx:
                    continue
                cross_samples, cross_density = distinction.density(
                    left[core_idx], right[cand_idx], distinction.cross_seed()
                )
                pairs.append(
                    PairOverlap(
                        core=core_idx,
                        candidate=cand_idx,
                        overlap=overlap(self_density, cross_density),
                        self_std=float(np.std(self_samples)),
                        cross_std=float(np.std(cross_samples)),
                    )
                )
        mean_overlap = float(np.mean([pair.overlap for pair in pairs]))
        logger.info(
            "noise level %.2f (%s): mean overlap %.4f",
            level,
            config.regime,
            mean_overlap,
        )
        rows.append(
            SweepRow(
                level=level,
                regime=config.regime,
                mean_overlap=mean_overlap,
                pairs=pairs,
            )
        )
    return SweepTable(rows=rows, config=config)


class PropertyReport(BaseModel):
    name: str
    trials: int
    n_violations: int
    max_violation: float

    @property
    def passed(self) -> bool:
        return self.n_violations == 0


def _random_mixture(rng: np.random.Generator, z: np.ndarray) -> np.ndarray:
    n_components = int(rng.integers(1, 4))
    weights = rng.dirichlet(np.ones(n_components))
    means = rng.uniform(-5.0, 5.0, n_components)
    scales = rng.uniform(0.2, 2.0, n_components)
    return sum(
        w * gaussian(z - m, s) for w, m, s in zip(weights, means, scales, strict=True)
    )


def overlap_lipschitz_check(
    trials: int,
    seed: int,
    slack: float = 1e-6,
) -> PropertyReport:
    """Check ``|O(p, q) - O(p', q')| <= |p - p'|_1 + |q - q'|_1``.

    Densities are random Gaussian mixtures on a fixed grid, the perturbed pair
    alternates between mixing in another mixture and a small shift.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = get_rng(seed)
    z = np.linspace(-12.0, 12.0, KDE_GRID_POINTS)
    max_violation = -np.inf
    n_violations = 0
    for trial in range(trials):
        p = _random_mixture(rng, z)
        q = _random_mixture(rng, z)
        if trial % 2:
            eps = rng.uniform(0.0, 0.5)
            p_hat = (1 - eps) * p + eps * _random_mixture(rng, z)
            q_hat = (1 - eps) * q + eps * _random_mixture(rng, z)
        else:
            shift = rng.uniform(-0.1, 0.1)
            p_hat = np.interp(z - shift, z, p, left=0.0, right=0.0)
            q_hat = np.interp(z + shift, z, q, left=0.0, right=0.0)

        delta = trapezoid(np.abs(p - p_hat), z) + trapezoid(np.abs(q - q_hat), z)
        change = abs(overlap_on_grid(p, q, z) - overlap_on_grid(p_hat, q_hat, z))
        violation = change - delta
        max_violation = max(max_violation, violation)
        if violation > slack:
            n_violations += 1
    return PropertyReport(
        name="overlap lipschitz",
        trials=trials,
        n_violations=n_violations,
        max_violation=float(max_violation),
    )


def _random_diagram(rng: np.random.Generator) -> PersistenceDiagram:
    n_pairs = int(rng.integers(0, 4))
    births = rng.integers(0, 3, n_pairs) * 0.5
    lifetimes = rng.integers(1, 4, n_pairs) * 0.5
    return PersistenceDiagram.from_pairs(1, zip(births, births + lifetimes))


def tv_pushforward_check(
    trials: int,
    seed: int,
    max_atoms: int = 6,
    slack: float = 1e-12,
) -> PropertyReport:
    """Check that mapping diagram distributions through MTD never increases TV.

    Atoms are random diagrams with coarse coordinates, so distinct diagrams
    often share an MTD value.
    """
    if not 1 <= max_atoms <= 6:
        raise ValueError("max_atoms must be within [1, 6]")
    rng = get_rng(seed)
    max_violation = -np.inf
    n_violations = 0
    for _ in range(trials):
        n_atoms = int(rng.integers(1, max_atoms + 1))
        atoms = [_random_diagram(rng) for _ in range(n_atoms)]
        p = rng.dirichlet(np.ones(n_atoms))
        q = rng.dirichlet(np.ones(n_atoms))
        tv_diagrams = 0.5 * float(np.abs(p - q).sum())

        mtd_values = np.array([mtd(atom) for atom in atoms])
        support, inverse = np.unique(mtd_values, return_inverse=True)
        p_mtd = np.bincount(inverse, weights=p, minlength=support.size)
        q_mtd = np.bincount(inverse, weights=q, minlength=support.size)
        tv_mtd = 0.5 * float(np.abs(p_mtd - q_mtd).sum())

        violation = tv_mtd - tv_diagrams
        max_violation = max(max_violation, violation)
        if violation > slack:
            n_violations += 1
    return PropertyReport(
        name="tv pushforward",
        trials=trials,
        n_violations=n_violations,
        max_violation=float(max_violation),
    )
