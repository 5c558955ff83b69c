from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from crosspers.datasets import chirp_dataset, sinusoid
from crosspers.models.cloud import SeriesTooShortError, TimeSeries
from crosspers.oracles import auc_pairwise
from crosspers.persistence import cross_barcodes
from crosspers.summaries import mtd, persistence_entropy
from crosspers.topgen import (
    LogisticConfig,
    OneVsRestClassifier,
    SingleClassError,
    TopGen,
    TopGenConfig,
    embed_series,
    evaluate,
    logistic_fit,
    logistic_predict,
    roc_auc,
    select_references,
    topgen_features,
)
from crosspers.utils import get_rng

SMALL = TopGenConfig(embedding_dim=10, n_points=24, engine="native")


def noisy_sinusoid(period: float, seed: int, length: int = 60) -> TimeSeries:
    rng = get_rng(seed)
    return TimeSeries(sinusoid(length, period).values + rng.normal(0.0, 0.05, length))


@pytest.fixture(scope="module")
def references() -> list[TimeSeries]:
    return [noisy_sinusoid(period, seed) for seed, period in enumerate((8.0, 15.0, 30.0))]


def test_feature_schema(references: list[TimeSeries]) -> None:
    topgen = TopGen(SMALL, references)
    vector = topgen.features(noisy_sinusoid(12.0, 10))
    assert len(vector.values) == 12
    assert vector.schema[:4] == (
        "ref0_mtd_left",
        "ref0_mtd_right",
        "ref0_entropy_left",
        "ref0_entropy_right",
    )
    assert np.all(vector.values >= 0.0)

    split = SMALL.model_copy(update={"combine_hom_dims": False})
    assert split.feature_names(1) == [
        "ref0_mtd_left_h0",
        "ref0_mtd_left_h1",
        "ref0_mtd_right_h0",
        "ref0_mtd_right_h1",
        "ref0_entropy_left_h0",
        "ref0_entropy_left_h1",
        "ref0_entropy_right_h0",
        "ref0_entropy_right_h1",
    ]


def test_reference_itself_gives_zero_block(references: list[TimeSeries]) -> None:
    topgen = TopGen(SMALL, references)
    vector = topgen.features(references[1])
    np.testing.assert_array_equal(vector.values[4:8], 0.0)
    assert np.any(vector.values[:4] > 0.0)


def test_features_compose_cross_barcodes(references: list[TimeSeries]) -> None:
    series = noisy_sinusoid(20.0, 11)
    topgen = TopGen(SMALL, references[:1])
    vector = topgen_features(series, topgen).as_dict()

    cloud = embed_series(series, SMALL)
    reference = embed_series(references[0], SMALL)
    left = cross_barcodes(cloud, reference, [0, 1], engine="native")
    right = cross_barcodes(reference, cloud, [0, 1], engine="native")

    assert vector["ref0_mtd_left"] == pytest.approx(mtd(left[0]) + mtd(left[1]))
    assert vector["ref0_mtd_right"] == pytest.approx(mtd(right[0]) + mtd(right[1]))
    assert vector["ref0_entropy_left"] == pytest.approx(
        persistence_entropy(left[0]) + persistence_entropy(left[1])
    )


def test_reference_order_permutes_blocks(references: list[TimeSeries]) -> None:
    series = noisy_sinusoid(12.0, 12)
    forward = TopGen(SMALL, references).features(series).values
    shuffled = TopGen(SMALL, references[::-1]).features(series).values
    np.testing.assert_array_equal(shuffled.reshape(3, 4), forward.reshape(3, 4)[::-1])


def test_feature_matrix_matches_single_features(references: list[TimeSeries]) -> None:
    topgen = TopGen(SMALL.model_copy(update={"n_jobs": 2}), references[:2])
    series = [noisy_sinusoid(10.0, seed) for seed in range(3)]
    matrix = topgen.feature_matrix(series)
    assert matrix.shape == (3, 8)
    np.testing.assert_array_equal(matrix[2], topgen.features(series[2]).values)


def test_embedding_is_thinned() -> None:
    cloud = embed_series(noisy_sinusoid(8.0, 0), SMALL)
    assert cloud.dim == 3
    assert cloud.n_points == 24

    keep_all = embed_series(noisy_sinusoid(8.0, 0), SMALL.model_copy(update={"n_points": 0}))
    assert keep_all.n_points == 51


def test_topgen_errors(references: list[TimeSeries]) -> None:
    with pytest.raises(ValidationError):
        TopGenConfig(embedding_dim=2, pca_dim=3)
    with pytest.raises(ValueError):
        TopGen(SMALL, [])

    topgen = TopGen(SMALL, references)
    with pytest.raises(SeriesTooShortError):
        topgen.features(TimeSeries(np.zeros(5)))


def test_select_references() -> None:
    series = [TimeSeries(np.full(4, float(idx))) for idx in range(6)]
    labels = [1, 0, 1, 0, 2, 2]

    refs, indices = select_references(series, labels, indices=[4, 0, 1])
    assert indices == [1, 0, 4]
    assert [ref.values[0] for ref in refs] == [1.0, 0.0, 4.0]

    with pytest.raises(ValueError):
        select_references(series, labels, indices=[0, 2, 4])

    _, drawn = select_references(series, labels, seed=3)
    assert [labels[idx] for idx in drawn] == [0, 1, 2]
    assert select_references(series, labels, seed=3)[1] == drawn


def test_logistic_separable() -> None:
    rng = get_rng(0)
    x = np.vstack((rng.normal(-2.0, 0.5, (30, 2)), rng.normal(2.0, 0.5, (30, 2))))
    y = np.repeat([0, 1], 30)
    classifier = logistic_fit(x, y)

    report = evaluate(classifier, x, y)
    assert report.accuracy == 1.0
    assert report.roc_auc == 1.0
    assert report.n_samples == 60

    assert logistic_predict(classifier, np.array([3.0, 3.0])) > 0.9
    assert logistic_predict(classifier, np.array([-3.0, -3.0])) < 0.1


def test_logistic_regularization_shrinks_weights() -> None:
    rng = get_rng(1)
    x = rng.normal(size=(40, 3))
    y = (x[:, 0] + 0.5 * rng.normal(size=40) > 0.0).astype(int)
    loose = logistic_fit(x, y, LogisticConfig(l2=1e-3))
    tight = logistic_fit(x, y, LogisticConfig(l2=10.0))
    assert np.linalg.norm(tight.weights) < np.linalg.norm(loose.weights)


def test_logistic_fit_is_deterministic() -> None:
    rng = get_rng(2)
    x = rng.normal(size=(30, 4))
    y = (x[:, 1] > 0.0).astype(int)
    first, second = logistic_fit(x, y), logistic_fit(x, y)
    np.testing.assert_array_equal(first.weights, second.weights)
    assert first.bias == second.bias
    assert set(LogisticConfig.model_fields) == {"l2", "max_iter"}


def test_logistic_errors() -> None:
    x = np.zeros((4, 2))
    with pytest.raises(SingleClassError):
        logistic_fit(x, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        logistic_fit(x, [0, 1, 2, 1])
    with pytest.raises(ValueError):
        logistic_fit(x[:1], [0])


def test_roc_auc() -> None:
    labels = np.array([0, 0, 1, 1])
    assert roc_auc(np.array([0.1, 0.2, 0.8, 0.9]), labels) == 1.0
    assert roc_auc(np.array([0.9, 0.8, 0.2, 0.1]), labels) == 0.0
    assert roc_auc(np.array([0.5, 0.5, 0.5, 0.5]), labels) == 0.5

    rng = get_rng(4)
    for _ in range(20):
        scores = rng.integers(0, 5, 30).astype(float)
        labels = rng.integers(0, 2, 30)
        if 0 < labels.sum() < labels.size:
            assert roc_auc(scores, labels) == pytest.approx(auc_pairwise(scores, labels))

    scores, labels = rng.normal(size=4000), rng.integers(0, 2, 4000)
    assert roc_auc(scores, labels) == pytest.approx(0.5, abs=0.03)

    with pytest.raises(SingleClassError):
        roc_auc(np.ones(3), np.zeros(3))


def test_one_vs_rest() -> None:
    rng = get_rng(5)
    centers = np.array([[0.0, 0.0], [3.0, 0.0], [1.5, 3.0]])
    labels = np.repeat([0, 1, 2], 30)
    points = centers[labels] + rng.normal(0.0, 0.3, (90, 2))
    classifier = OneVsRestClassifier.fit(points, labels)
    assert classifier.classes == (0, 1, 2)

    probs = classifier.predict_proba(points)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    report = evaluate(classifier, points, labels)
    assert report.accuracy > 0.95
    assert report.roc_auc > 0.95

    with pytest.raises(SingleClassError):
        OneVsRestClassifier.fit(points[:30], labels[:30])


@pytest.mark.slow
def test_chirp_detection() -> None:
    series, labels = chirp_dataset(40, length=160, seed=1)
    config = TopGenConfig(embedding_dim=20, n_points=48, engine="native", n_jobs=0)
    train_idx, test_idx = np.arange(30), np.arange(30, 40)

    references, _ = select_references([series[i] for i in train_idx], labels[train_idx], seed=0)
    topgen = TopGen(config, references)
    train_features = topgen.feature_matrix([series[i] for i in train_idx])
    test_features = topgen.feature_matrix([series[i] for i in test_idx])

    classifier = logistic_fit(train_features, labels[train_idx])
    assert evaluate(classifier, test_features, labels[test_idx]).roc_auc > 0.5


@pytest.mark.slow
def test_mtd_features_beside_entropy() -> None:
    config = TopGenConfig(embedding_dim=20, n_points=32, n_jobs=0)
    both, entropy_only = [], []
    for seed in range(5):
        series, labels = chirp_dataset(700, length=160, seed=seed)
        train, test = slice(0, 500), slice(500, 700)
        references, _ = select_references(series[train], labels[train], seed=seed)
        topgen = TopGen(config, references)
        train_features = topgen.feature_matrix(series[train])
        test_features = topgen.feature_matrix(series[test])

        classifier = logistic_fit(train_features, labels[train])
        both.append(evaluate(classifier, test_features, labels[test]).roc_auc)

        columns = [idx for idx, name in enumerate(topgen.schema) if "_entropy_" in name]
        classifier = logistic_fit(train_features[:, columns], labels[train])
        entropy_only.append(
            evaluate(classifier, test_features[:, columns], labels[test]).roc_auc
        )

    assert np.mean(both) > 0.55
    assert np.mean(entropy_only) > 0.55
    assert np.mean(both) >= np.mean(entropy_only) - 0.02
