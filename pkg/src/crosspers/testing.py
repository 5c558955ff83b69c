from __future__ import annotations

import numpy as np
import pytest

from crosspers.crossripsnet.model import CrnModelConfig
from crosspers.crossripsnet.reducers import QuantileReducer
from crosspers.datasets import circles
from crosspers.models.cloud import PointCloud
from crosspers.summaries import GridSpec
from crosspers.utils import get_rng


def pytest_addoption(parser) -> None:
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="run the slow end-to-end experiments",
    )


def pytest_collection_modifyitems(config, items) -> None:
    if config.getoption("--slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def slow(pytestconfig) -> bool:
    return pytestconfig.getoption("slow")


@pytest.fixture
def rng() -> np.random.Generator:
    return get_rng(42)


@pytest.fixture
def unit_square() -> PointCloud:
    return PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


@pytest.fixture(scope="session")
def circle_cloud() -> PointCloud:
    return circles(200, 1, seed=1, noise=0.02)


@pytest.fixture(scope="session")
def two_circles_cloud() -> PointCloud:
    return circles(200, 2, seed=2, noise=0.02)


@pytest.fixture
def tiny_model_config() -> CrnModelConfig:
    return CrnModelConfig(
        variant="c_dual_with_distance",
        reducer=QuantileReducer(k=4),
        phi1_sizes=[8, 8],
        phi2_sizes=[6],
        head_hidden=[8],
        grid=GridSpec(nx=3, ny=3),
    )
