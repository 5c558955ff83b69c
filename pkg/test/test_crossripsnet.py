from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from crosspers.crossripsnet import (
    CrnModel,
    CrnModelConfig,
    TrainingConfig,
    deepsets_encode,
    distance_features,
    grad_check,
    kl_loss,
    predict_mtd_density,
    sym_kl,
    train,
)
from crosspers.crossripsnet.dataset import (
    DensityDatasetConfig,
    build_density_dataset,
    synthetic_circle_pairs,
)
from crosspers.crossripsnet.mlp import MlpParams
from crosspers.crossripsnet.reducers import PcaReducer, ReducerSizeError
from crosspers.crossripsnet.training import (
    CrnSample,
    evaluate_sym_kl,
    train_test_split,
)
from crosspers.datasets import circles
from crosspers.geometry import cross_distance_matrix
from crosspers.models.cloud import DimensionMismatchError, PointCloud
from crosspers.summaries import DensityGrid, EmptyDatasetError, GridSpec
from crosspers.utils import get_rng


def cloud_pair(seed: int = 0) -> tuple[PointCloud, PointCloud]:
    return circles(10, 1, seed=seed, noise=0.05), circles(12, 2, seed=seed + 1, noise=0.05)


def peaked_target(grid: GridSpec, cell: int = 0) -> DensityGrid:
    values = np.full(grid.n_cells, 0.1 / grid.n_cells)
    values[cell] += 0.9
    return DensityGrid(spec=grid, values=values, normalized=False).normalized_copy()


def sample(config: CrnModelConfig, seed: int = 0, cell: int = 0) -> CrnSample:
    left, right = cloud_pair(seed)
    return CrnSample(left, right, peaked_target(config.grid, cell))


def test_deepsets_identity() -> None:
    identity = MlpParams(weights=[np.eye(2)], biases=[np.zeros(2)])
    cloud = PointCloud(np.array([[1.0, 2.0]]))
    np.testing.assert_array_equal(deepsets_encode(cloud, identity, identity), [1.0, 2.0])


def test_deepsets_permutation_and_duplication(rng: np.random.Generator) -> None:
    phi1 = MlpParams.init([3, 8, 5], rng)
    phi2 = MlpParams(weights=[np.eye(5)], biases=[np.zeros(5)], final_activation=False)
    cloud = PointCloud(rng.normal(size=(20, 3)))

    encoded = deepsets_encode(cloud, phi1, phi2)
    permuted = cloud.subsample(rng.permutation(20))
    np.testing.assert_array_equal(deepsets_encode(permuted, phi1, phi2), encoded)

    doubled = cloud.concatenate(cloud)
    np.testing.assert_allclose(deepsets_encode(doubled, phi1, phi2), 2.0 * encoded, rtol=1e-12)

    with pytest.raises(DimensionMismatchError):
        deepsets_encode(PointCloud(np.zeros((3, 2))), phi1, phi2)


def test_distance_features(rng: np.random.Generator) -> None:
    left, right = PointCloud(rng.normal(size=(2, 2))), PointCloud(rng.normal(size=(3, 2)))
    cross = cross_distance_matrix(left, right)

    topk = distance_features(cross, "topk_max", 5)
    np.testing.assert_array_equal(topk, -np.sort(-cross.entries, axis=1))

    quantiles = distance_features(cross, "quantiles", 3)
    np.testing.assert_allclose(quantiles[:, 0], cross.entries.min(axis=1))
    np.testing.assert_allclose(quantiles[:, -1], cross.entries.max(axis=1))

    origin = PointCloud(np.zeros((1, 2)))
    constant = cross_distance_matrix(origin, PointCloud(np.zeros((2, 2))))
    np.testing.assert_array_equal(distance_features(constant, "quantiles", 3), 0.0)

    assert distance_features(cross, "pca", 2).shape == (5, 2)

    with pytest.raises(ReducerSizeError):
        distance_features(cross, "topk_max", 6)
    with pytest.raises(ValueError):
        distance_features(cross, "median", 2)


def test_distance_features_benchmark_size() -> None:
    cross = cross_distance_matrix(circles(40, 1, seed=0), circles(40, 2, seed=1))
    assert distance_features(cross, "quantiles", 60).shape == (80, 60)
    assert distance_features(cross, "topk_max", 60).shape == (80, 60)


@pytest.mark.parametrize(
    ("variant", "blocks"),
    [
        ("a_merged", ("combined",)),
        ("b_dual", ("combined", "left", "right")),
        ("c_dual_with_distance", ("combined", "left", "right", "distance")),
    ],
)
def test_variant_blocks(
    tiny_model_config: CrnModelConfig, variant: str, blocks: tuple[str, ...]
) -> None:
    config = tiny_model_config.model_copy(update={"variant": variant})
    model = CrnModel.new(config, input_dim=2)
    assert tuple(model.encoders) == blocks
    assert model.head.output_dim == config.grid.n_cells

    prediction = model.forward(*cloud_pair())
    assert prediction.shape == (3, 3)
    assert np.all(prediction.values >= 0.0)
    assert prediction.total() == pytest.approx(1.0, abs=1e-9)


def test_right_encoder_ablation(tiny_model_config: CrnModelConfig) -> None:
    config = tiny_model_config.model_copy(update={"right_encoder": False})
    model = CrnModel.new(config, input_dim=2)
    assert "right" not in model.encoders
    assert model.forward(*cloud_pair()).total() == pytest.approx(1.0, abs=1e-9)


def test_forward_is_permutation_invariant(
    tiny_model_config: CrnModelConfig, rng: np.random.Generator
) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=3)
    left, right = cloud_pair(4)
    expected = model.forward(left, right).values
    for _ in range(3):
        permuted_left = left.subsample(rng.permutation(left.n_points))
        permuted_right = right.subsample(rng.permutation(right.n_points))
        np.testing.assert_array_equal(
            model.forward(permuted_left, permuted_right).values, expected
        )


def test_forward_dimension_mismatch(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=3)
    with pytest.raises(DimensionMismatchError):
        model.forward(*cloud_pair())


def test_kl_loss(rng: np.random.Generator) -> None:
    grid = GridSpec(nx=4, ny=4)
    target = peaked_target(grid)
    assert kl_loss(target, target) == pytest.approx(0.0, abs=1e-6)
    assert sym_kl(target, target) == pytest.approx(0.0, abs=1e-6)

    for _ in range(1000):
        p, q = rng.dirichlet(np.ones(16)), rng.dirichlet(np.ones(16))
        assert kl_loss(p, q) >= 0.0
        assert sym_kl(p, q) == pytest.approx(sym_kl(q, p))

    p, q = np.array([0.5, 0.5]), np.array([0.9, 0.1])
    expected = 0.5 * np.log(0.5 / 0.9) + 0.5 * np.log(0.5 / 0.1)
    assert kl_loss(q, p) == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(0.5108, abs=1e-4)

    with pytest.raises(DimensionMismatchError):
        kl_loss(np.ones(3) / 3, np.ones(4) / 4)


def test_grad_check(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=1)
    assert grad_check(model, sample(tiny_model_config), n_checks=64, seed=2) < 1e-4

    linear = tiny_model_config.model_copy(update={"head_hidden": []})
    model = CrnModel.new(linear, input_dim=2, seed=1)
    assert grad_check(model, sample(linear), n_checks=32, subset="head") < 1e-6


def test_training_is_deterministic(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=5)
    before = [p.copy() for p in model.parameters()]
    samples = [sample(tiny_model_config, seed, cell=seed) for seed in range(4)]
    config = TrainingConfig(epochs=5, batch_size=2, learning_rate=1e-2, seed=9)

    first = train(model, samples, config)
    second = train(model, samples, config)
    assert first.history == second.history
    for a, b in zip(first.model.parameters(), second.model.parameters(), strict=True):
        np.testing.assert_array_equal(a, b)

    for a, b in zip(model.parameters(), before, strict=True):
        np.testing.assert_array_equal(a, b)

    parallel = train(model, samples, config.model_copy(update={"n_jobs": 3}))
    assert parallel.history == first.history


def test_training_reduces_loss(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=5)
    samples = [sample(tiny_model_config, seed=1, cell=4)]
    result = train(model, samples, TrainingConfig(epochs=30, learning_rate=1e-2))
    assert len(result.history) == 30
    assert result.history[-1] < result.history[0]


def test_zero_learning_rate(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2)
    result = train(model, [sample(tiny_model_config)], TrainingConfig(epochs=3, learning_rate=0.0))
    for a, b in zip(result.model.parameters(), model.parameters(), strict=True):
        np.testing.assert_array_equal(a, b)

    sgd = TrainingConfig(epochs=3, learning_rate=0.0, optimizer="sgd")
    result = train(model, [sample(tiny_model_config)], sgd)
    for a, b in zip(result.model.parameters(), model.parameters(), strict=True):
        np.testing.assert_array_equal(a, b)


def test_training_errors(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2)
    with pytest.raises(EmptyDatasetError):
        train(model, [])

    left, right = cloud_pair()
    unnormalized = DensityGrid(spec=tiny_model_config.grid, values=np.ones((3, 3)))
    with pytest.raises(ValueError):
        train(model, [CrnSample(left, right, unnormalized)])

    wrong_grid = peaked_target(GridSpec(nx=2, ny=2))
    with pytest.raises(DimensionMismatchError):
        train(model, [CrnSample(left, right, wrong_grid)])


def test_train_test_split(tiny_model_config: CrnModelConfig) -> None:
    samples = [sample(tiny_model_config, seed) for seed in range(10)]
    train_samples, test_samples = train_test_split(samples, 0.8, seed=1)
    assert len(train_samples) == 8
    assert len(test_samples) == 2
    ids = {id(s) for s in train_samples} | {id(s) for s in test_samples}
    assert len(ids) == 10


def test_pca_reducer_is_fit_on_training_pairs(
    tiny_model_config: CrnModelConfig, tmp_path: Path
) -> None:
    config = tiny_model_config.model_copy(update={"reducer": PcaReducer(k=3)})
    model = CrnModel.new(config, input_dim=2)
    with pytest.raises(ValueError):
        model.forward(*cloud_pair())

    samples = [sample(config, seed) for seed in range(3)]
    result = train(model, samples, TrainingConfig(epochs=1))
    assert result.model.config.reducer.is_fitted
    assert not model.config.reducer.is_fitted

    result.model.save(tmp_path / "model.json")
    loaded = CrnModel.load(tmp_path / "model.json")
    left, right = cloud_pair(7)
    np.testing.assert_array_equal(
        loaded.forward(left, right).values, result.model.forward(left, right).values
    )


def test_model_serialization(tiny_model_config: CrnModelConfig, tmp_path: Path) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=11)
    file = tmp_path / "model.json"
    model.save(file)
    loaded = CrnModel.load(file)
    assert loaded.config == model.config
    assert loaded.n_parameters == model.n_parameters
    left, right = cloud_pair()
    np.testing.assert_array_equal(
        loaded.forward(left, right).values, model.forward(left, right).values
    )

    with pytest.raises(FileNotFoundError):
        CrnModel.load(tmp_path / "missing.json")


def test_predict_mtd_density(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2)
    with pytest.raises(ValueError):
        predict_mtd_density(model, *cloud_pair())

    curve = tiny_model_config.model_copy(
        update={"grid": GridSpec(x_min=0.0, x_max=1.0, y_min=0.0, y_max=0.0, nx=6, ny=1)}
    )
    model = CrnModel.new(curve, input_dim=2)
    prediction = predict_mtd_density(model, *cloud_pair())
    assert prediction.shape == (6, 1)
    assert prediction.total() == pytest.approx(1.0, abs=1e-9)
    assert sym_kl(prediction, prediction) == pytest.approx(0.0, abs=1e-9)


def test_build_density_dataset() -> None:
    pairs = synthetic_circle_pairs(3, n_points=16, seed=0)
    config = DensityDatasetConfig(
        n_subsamples=3, subsample_size=8, resolution=5, hom_dim=1, engine="native"
    )
    samples, grid = build_density_dataset(pairs, config)
    assert len(samples) == 3
    assert grid.shape == (5, 5)
    for s in samples:
        assert s.target.normalized
        assert s.target.spec == grid

    h0 = config.model_copy(update={"hom_dim": 0})
    _, grid = build_density_dataset(pairs, h0)
    assert grid.shape == (1, 5)

    mtd = config.model_copy(update={"hom_dim": 0, "target": "mtd"})
    samples, grid = build_density_dataset(pairs, mtd)
    assert grid.shape == (5, 1)
    assert samples[0].target.total() == pytest.approx(1.0, abs=1e-9)

    with pytest.raises(EmptyDatasetError):
        build_density_dataset([], config)


def test_synthetic_pairs_are_seeded() -> None:
    first = synthetic_circle_pairs(4, n_points=12, seed=3)
    second = synthetic_circle_pairs(4, n_points=12, seed=3)
    for (a, b), (c, d) in zip(first, second, strict=True):
        assert a.same_as(c)
        assert b.same_as(d)


@pytest.mark.slow
def test_overfit_single_pair(tiny_model_config: CrnModelConfig) -> None:
    model = CrnModel.new(tiny_model_config, input_dim=2, seed=0)
    samples = [sample(tiny_model_config, seed=2, cell=7)]
    initial = evaluate_sym_kl(model, samples)
    result = train(model, samples, TrainingConfig(epochs=400, learning_rate=1e-2))
    assert evaluate_sym_kl(result.model, samples) <= initial / 10.0


def held_out_sym_kl(
    samples: list[CrnSample], grid: GridSpec, seed: int, **update
) -> float:
    train_samples, test_samples = train_test_split(samples, 0.8, seed=seed)
    config = CrnModelConfig(
        phi1_sizes=[16, 16], phi2_sizes=[16], head_hidden=[32], grid=grid
    )
    config = config.model_copy(
        update={"reducer": config.reducer.model_copy(update={"k": 8}), **update}
    )
    model = CrnModel.new(config, input_dim=2, seed=seed)
    trained = train(
        model, train_samples, TrainingConfig(epochs=60, learning_rate=3e-3, seed=seed)
    )
    return evaluate_sym_kl(trained.model, test_samples)


@pytest.mark.slow
def test_mtd_density_prediction() -> None:
    pairs = synthetic_circle_pairs(40, n_points=32, seed=1)
    dataset = DensityDatasetConfig(
        target="mtd", n_subsamples=12, subsample_size=12, hom_dim=0, resolution=16
    )
    samples, grid = build_density_dataset(pairs, dataset)
    train_samples, test_samples = train_test_split(samples, 0.8, seed=1)
    config = CrnModelConfig(
        variant="c_dual_with_distance",
        phi1_sizes=[16, 16],
        phi2_sizes=[16],
        head_hidden=[32],
        grid=grid,
    )
    config = config.model_copy(update={"reducer": config.reducer.model_copy(update={"k": 8})})
    model = CrnModel.new(config, input_dim=2, seed=1)
    result = train(model, train_samples, TrainingConfig(epochs=150, learning_rate=3e-3))

    hits = []
    for s in test_samples:
        prediction = predict_mtd_density(result.model, s.left, s.right)
        peak = s.target.values.max()
        hits.append(s.target.values[prediction.argmax()] > 0.01 * peak)
    assert len(test_samples) == 8
    assert np.mean(hits) >= 0.8


@pytest.mark.slow
def test_distance_block_helps() -> None:
    pairs = synthetic_circle_pairs(40, n_points=24, seed=2)
    dataset = DensityDatasetConfig(n_subsamples=8, subsample_size=12, resolution=8)
    samples, grid = build_density_dataset(pairs, dataset)

    merged = [held_out_sym_kl(samples, grid, seed, variant="a_merged") for seed in range(3)]
    dual = [
        held_out_sym_kl(samples, grid, seed, variant="c_dual_with_distance")
        for seed in range(3)
    ]
    assert np.mean(dual) <= np.mean(merged)


@pytest.mark.slow
def test_right_encoder_ablation_keeps_accuracy() -> None:
    pairs = synthetic_circle_pairs(40, n_points=24, seed=5)
    dataset = DensityDatasetConfig(n_subsamples=8, subsample_size=12, resolution=8)
    samples, grid = build_density_dataset(pairs, dataset)

    full = [held_out_sym_kl(samples, grid, seed) for seed in range(3)]
    ablated = [held_out_sym_kl(samples, grid, seed, right_encoder=False) for seed in range(3)]
    assert np.mean(ablated) <= 1.25 * np.mean(full)


def test_rng_fixture_is_seeded(rng: np.random.Generator) -> None:
    assert rng.integers(1 << 30) == get_rng(42).integers(1 << 30)
