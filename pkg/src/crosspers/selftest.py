"""Randomized property suites against the oracles."""

from __future__ import annotations

import logging
from itertools import combinations
from typing import Callable

import numpy as np
from rich import box
from rich.table import Table

from crosspers.crossripsnet.model import CrnModel, CrnModelConfig
from crosspers.crossripsnet.reducers import QuantileReducer
from crosspers.crossripsnet.training import CrnSample, grad_check
from crosspers.datasets import circles
from crosspers.filtration import cross_vr_filtration, vr_filtration
from crosspers.geometry import cross_distance_matrix, pairwise_distances
from crosspers.models.cloud import PointCloud
from crosspers.oracles import (
    BoundaryOracle,
    auc_pairwise,
    cross_filtering_value,
    gaussian_overlap,
)
from crosspers.persistence import cross_barcode, reduce
from crosspers.stats import (
    PropertyReport,
    kde1d,
    overlap,
    overlap_lipschitz_check,
    tv_pushforward_check,
)
from crosspers.summaries import DensityGrid, GridSpec, mtd
from crosspers.topgen import roc_auc
from crosspers.utils import get_rng

logger = logging.getLogger(__name__)

Suite = Callable[[int, int], PropertyReport]


def _report(name: str, trials: int, violations: list[float]) -> PropertyReport:
    return PropertyReport(
        name=name,
        trials=trials,
        n_violations=len(violations),
        max_violation=max(violations, default=0.0),
    )


def reduction_suite(trials: int, seed: int) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        cloud = PointCloud(rng.uniform(size=(int(rng.integers(2, 8)), int(rng.integers(2, 4)))))
        filt = vr_filtration(pairwise_distances(cloud), max_dim=1, max_scale="max")
        oracle = BoundaryOracle(filt)
        for diagram in reduce(filt, 1):
            if diagram.as_multiset() != oracle.pairs(diagram.dim):
                violations.append(1.0)
    return _report("reduction vs boundary ranks", trials, violations)


def clearing_suite(trials: int, seed: int) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        cloud = PointCloud(rng.uniform(size=(int(rng.integers(3, 12)), 2)))
        filt = vr_filtration(pairwise_distances(cloud), max_dim=1)
        with_clearing = reduce(filt, 1, clearing=True)
        without = reduce(filt, 1, clearing=False)
        if any(
            a.as_multiset(drop_zero=False) != b.as_multiset(drop_zero=False)
            for a, b in zip(with_clearing, without, strict=True)
        ):
            violations.append(1.0)
    return _report("clearing preserves diagrams", trials, violations)


def cross_filtration_suite(trials: int, seed: int) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        left = rng.uniform(size=(int(rng.integers(1, 4)), 2))
        right = rng.uniform(size=(int(rng.integers(1, 4)), 2))
        cross = cross_distance_matrix(PointCloud(left), PointCloud(right))
        filt = cross_vr_filtration(cross, max_dim=1, max_scale="max")
        n_vertices = cross.size
        expected = {
            simplex: cross_filtering_value(left, right, simplex)
            for size in range(1, 4)
            for simplex in combinations(range(n_vertices), size)
        }
        if dict(filt) != expected:
            violations.append(1.0)
    return _report("cross filtration vs filtering function", trials, violations)


def duplicate_suite(trials: int, seed: int, max_points: int = 64) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        cloud = PointCloud(rng.normal(size=(int(rng.integers(2, max_points + 1)), 2)))
        duplicate = PointCloud(cloud.points.copy())
        for dim in (0, 1):
            value = mtd(cross_barcode(cloud, duplicate, dim, engine="auto"))
            if value != 0.0:
                violations.append(value)
    return _report("duplicate clouds have zero MTD", trials, violations)


def auc_suite(trials: int, seed: int) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        n = int(rng.integers(4, 60))
        labels = np.arange(n) % 2
        rng.shuffle(labels)
        scores = rng.integers(0, 10, n).astype(float)
        difference = abs(roc_auc(scores, labels) - auc_pairwise(scores, labels))
        if difference > 0.0:
            violations.append(difference)
    return _report("rank auc vs pairwise auc", trials, violations)


def gaussian_overlap_suite(trials: int, seed: int) -> PropertyReport:
    rng = get_rng(seed)
    violations = []
    for _ in range(trials):
        p = kde1d(rng.normal(0.0, 1.0, 10_000))
        q = kde1d(rng.normal(2.0, 1.0, 10_000))
        error = abs(overlap(p, q) - gaussian_overlap(0.0, 2.0))
        if error > 0.02:
            violations.append(error)
        if abs(overlap(p, p) - 1.0) > 1e-3:
            violations.append(abs(overlap(p, p) - 1.0))
    return _report("gaussian overlap closed form", trials, violations)


def grad_check_suite(trials: int, seed: int) -> PropertyReport:
    violations = []
    for trial in range(trials):
        left = circles(6, 1, seed=seed + trial, noise=0.05)
        right = circles(6, 2, seed=seed + trial + 1, noise=0.05)
        grid = GridSpec(nx=3, ny=3)
        config = CrnModelConfig(
            reducer=QuantileReducer(k=4),
            phi1_sizes=[8, 8],
            phi2_sizes=[6],
            head_hidden=[8],
            grid=grid,
        )
        model = CrnModel.new(config, input_dim=2, seed=seed + trial)
        target = DensityGrid(spec=grid, values=np.full(grid.shape, 1.0 / 9.0), normalized=True)
        error = grad_check(model, CrnSample(left, right, target), seed=seed + trial)
        if error >= 1e-4:
            violations.append(error)
    return _report("analytic vs numeric gradients", trials, violations)


def lipschitz_suite(trials: int, seed: int) -> PropertyReport:
    return overlap_lipschitz_check(trials, seed)


def pushforward_suite(trials: int, seed: int) -> PropertyReport:
    return tv_pushforward_check(trials, seed)


SUITES: dict[str, tuple[Suite, int, int]] = {
    "reduction": (reduction_suite, 500, 25),
    "clearing": (clearing_suite, 100, 10),
    "cross_filtration": (cross_filtration_suite, 200, 20),
    "duplicate": (duplicate_suite, 50, 5),
    "auc": (auc_suite, 100, 20),
    "gaussian_overlap": (gaussian_overlap_suite, 1, 1),
    "lipschitz": (lipschitz_suite, 1000, 100),
    "pushforward": (pushforward_suite, 1000, 100),
    "grad_check": (grad_check_suite, 3, 1),
}


def run_selftest(
    seed: int = 0,
    quick: bool = False,
    suites: list[str] | None = None,
) -> list[PropertyReport]:
    reports = []
    for name, (suite, trials, quick_trials) in SUITES.items():
        if suites and name not in suites:
            continue
        n_trials = quick_trials if quick else trials
        logger.info("running %s with %d trials", name, n_trials)
        report = suite(n_trials, seed)
        if not report.passed:
            logger.error("%s failed: %d violations", report.name, report.n_violations)
        reports.append(report)
    return reports


def report_table(reports: list[PropertyReport]) -> Table:
    table = Table(box=box.SIMPLE, header_style=None)
    table.add_column("Property")
    table.add_column("Trials", justify="right")
    table.add_column("Violations", justify="right")
    table.add_column("Max violation", justify="right")
    table.add_column("")
    for report in reports:
        table.add_row(
            report.name,
            str(report.trials),
            str(report.n_violations),
            f"{report.max_violation:.2e}",
            "[green]✓" if report.passed else "[red]✗",
        )
    return table
