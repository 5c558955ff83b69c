"""Cross-persistence features of time series against class references."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import (
    BaseModel,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    model_validator,
)
from scipy.optimize import minimize
from scipy.special import expit
from scipy.stats import rankdata
from typing_extensions import Self

from crosspers import __version__
from crosspers.geometry import EigenSolver, pca_reduce, time_delay_embedding
from crosspers.jobs import map_ordered
from crosspers.models.cloud import PointCloud, TimeSeries
from crosspers.persistence import Engine, cross_barcodes
from crosspers.summaries import SummaryKind, summarize
from crosspers.utils import format_float, get_rng

logger = logging.getLogger(__name__)

Orientation = Literal["left", "right"]
ORIENTATIONS: tuple[Orientation, ...] = ("left", "right")


class SingleClassError(ValueError): ...


class TopGenConfig(BaseModel):
    embedding_dim: PositiveInt = Field(
        default=200,
        description="Dimension of the time-delay embedding.",
    )
    delay: PositiveInt = Field(default=1, description="Delay between coordinates.")
    pca_dim: PositiveInt = Field(
        default=3,
        description="Dimension after PCA of the embedded cloud.",
    )
    hom_dims: list[Literal[0, 1]] = Field(
        default=[0, 1],
        min_length=1,
        description="Homology dimensions of the cross-barcodes.",
    )
    combine_hom_dims: bool = Field(
        default=True,
        description="Sum every statistic over the homology dimensions.",
    )
    stats: list[SummaryKind] = Field(
        default=["mtd", "entropy"],
        min_length=1,
        description="Diagram statistics per orientation and reference.",
    )
    n_points: NonNegativeInt = Field(
        default=64,
        description="Keep this many evenly strided points of every embedded "
        "cloud, 0 keeps all.",
    )
    solver: EigenSolver = Field(default="eigh", description="PCA eigen-solver.")
    engine: Engine = "auto"
    n_jobs: NonNegativeInt = 1

    @model_validator(mode="after")
    def _check_dims(self) -> Self:
        if self.pca_dim > self.embedding_dim:
            raise ValueError(
                f"pca_dim {self.pca_dim} exceeds embedding_dim {self.embedding_dim}"
            )
        return self

    def feature_names(self, n_references: int) -> list[str]:
        dims = [""] if self.combine_hom_dims else [f"_h{dim}" for dim in self.hom_dims]
        return [
            f"ref{ref}_{stat}_{orientation}{dim}"
            for ref in range(n_references)
            for stat in self.stats
            for orientation in ORIENTATIONS
            for dim in dims
        ]


@dataclass(frozen=True, slots=True)
class FeatureVector:
    values: np.ndarray
    schema: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.schema):
            raise ValueError("feature values do not match the schema")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.schema, self.values.tolist(), strict=True))


def embed_series(series: TimeSeries, config: TopGenConfig) -> PointCloud:
    """Delay embedding, PCA and strided thinning of a series."""
    cloud = time_delay_embedding(series, config.embedding_dim, config.delay)
    cloud = pca_reduce(cloud, config.pca_dim, solver=config.solver)
    if config.n_points and cloud.n_points > config.n_points:
        indices = np.unique(np.linspace(0, cloud.n_points - 1, config.n_points).round())
        cloud = cloud.subsample(indices.astype(int))
    return cloud


@dataclass(slots=True)
class TopGen:
    """Feature generator with embedded class references."""

    config: TopGenConfig
    references: list[TimeSeries]
    _embedded: list[PointCloud] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self.references:
            raise ValueError("at least one reference series is required")
        self._embedded = [embed_series(ref, self.config) for ref in self.references]

    @property
    def schema(self) -> tuple[str, ...]:
        return tuple(self.config.feature_names(len(self.references)))

    def features(self, series: TimeSeries) -> FeatureVector:
        return topgen_features(series, self)

    def feature_matrix(self, series: Sequence[TimeSeries]) -> np.ndarray:
        jobs = [partial(topgen_features, s, self) for s in series]
        vectors = map_ordered(jobs, n_jobs=self.config.n_jobs, label="topgen")
        return np.vstack([vector.values for vector in vectors])


def topgen_features(series: TimeSeries, topgen: TopGen) -> FeatureVector:
    """Statistics of cross-barcodes between a series and every reference.

    For each reference the series is once the left and once the right
    argument; values are ordered reference, statistic, orientation.

    Raises:
        SeriesTooShortError: If the series is shorter than the embedding window.
    """
    config = topgen.config
    cloud = embed_series(series, config)
    values = []
    for reference in topgen._embedded:
        diagrams = {
            "left": cross_barcodes(cloud, reference, config.hom_dims, engine=config.engine),
            "right": cross_barcodes(reference, cloud, config.hom_dims, engine=config.engine),
        }
        for stat in config.stats:
            for orientation in ORIENTATIONS:
                per_dim = [
                    summarize(diagrams[orientation][dim], stat).value
                    for dim in config.hom_dims
                ]
                if config.combine_hom_dims:
                    values.append(float(np.sum(per_dim)))
                else:
                    values.extend(per_dim)
    return FeatureVector(values=np.array(values), schema=topgen.schema)


def select_references(
    series: Sequence[TimeSeries],
    labels: Sequence[int] | np.ndarray,
    indices: Sequence[int] | None = None,
    seed: int | None = None,
) -> tuple[list[TimeSeries], list[int]]:
    """One reference per class, in ascending class order.

    Args:
        series: Labelled series.
        labels: Class of every series.
        indices: Explicit reference index per class.
        seed: Draw one random member per class instead.

    Returns:
        tuple: References and the indices they were taken from.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if indices is not None:
        indices = list(indices)
        if sorted(labels[indices].tolist()) != classes.tolist():
            raise ValueError("reference indices must cover every class exactly once")
        indices = sorted(indices, key=lambda idx: labels[idx])
    else:
        rng = get_rng(seed or 0)
        indices = [int(rng.choice(np.flatnonzero(labels == cls))) for cls in classes]
    return [series[idx] for idx in indices], indices


def write_features(file: Path, schema: Sequence[str], matrix: np.ndarray) -> None:
    logger.info("writing %d feature rows to %s", matrix.shape[0], file)
    lines = [",".join(schema) + "\n"]
    lines.extend(",".join(format_float(v) for v in row) + "\n" for row in matrix)
    file.write_text("".join(lines))


class LogisticConfig(BaseModel):
    l2: PositiveFloat = Field(
        default=1e-2,
        description="Strength of the L2 penalty on the weights.",
    )
    max_iter: PositiveInt = Field(default=500, description="L-BFGS iterations.")


@dataclass(frozen=True, slots=True)
class LogisticClassifier:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        standardized = (np.atleast_2d(features) - self.mean) / self.scale
        return standardized @ self.weights + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return np.clip(expit(self.decision_function(features)), 1e-15, 1.0 - 1e-15)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }


def _features_array(features: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return np.atleast_2d(features).astype(float)
    return np.vstack([f.values for f in features])


def logistic_fit(
    features: Sequence[FeatureVector] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    config: LogisticConfig | None = None,
) -> LogisticClassifier:
    """L2-regularized logistic regression on standardized features.

    The mean cross-entropy plus ``l2 / 2 * |w|^2`` is minimized by L-BFGS from
    a zero start.

    Raises:
        SingleClassError: If the labels contain only one class.
    """
    config = config or LogisticConfig()
    x = _features_array(features)
    y = np.asarray(labels, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("logistic regression needs at least two samples")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be binary 0/1")
    if np.unique(y).size < 2:
        raise SingleClassError("training labels contain a single class")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0.0] = 1.0
    z = (x - mean) / scale
    signs = 2.0 * y - 1.0

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        weights, bias = theta[:-1], theta[-1]
        margins = signs * (z @ weights + bias)
        loss = np.mean(np.logaddexp(0.0, -margins)) + 0.5 * config.l2 * weights @ weights
        coeff = -signs * expit(-margins) / z.shape[0]
        grad = np.append(z.T @ coeff + config.l2 * weights, coeff.sum())
        return float(loss), grad

    result = minimize(
        objective,
        np.zeros(z.shape[1] + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter},
    )
    if not result.success:
        logger.warning("logistic regression did not converge: %s", result.message)
    return LogisticClassifier(
        mean=mean, scale=scale, weights=result.x[:-1], bias=float(result.x[-1])
    )


def logistic_predict(
    classifier: LogisticClassifier, features: FeatureVector | np.ndarray
) -> np.ndarray | float:
    values = features.values if isinstance(features, FeatureVector) else features
    probs = classifier.predict_proba(values)
    return float(probs[0]) if np.ndim(values) == 1 else probs


@dataclass(frozen=True, slots=True)
class OneVsRestClassifier:
    classes: tuple[int, ...]
    estimators: tuple[LogisticClassifier, ...]

    @classmethod
    def fit(
        cls,
        features: Sequence[FeatureVector] | np.ndarray,
        labels: Sequence[int] | np.ndarray,
        config: LogisticConfig | None = None,
    ) -> OneVsRestClassifier:
        labels = np.asarray(labels)
        classes = tuple(int(c) for c in np.unique(labels))
        if len(classes) < 2:
            raise SingleClassError("training labels contain a single class")
        estimators = tuple(
            logistic_fit(features, (labels == c).astype(int), config) for c in classes
        )
        return cls(classes=classes, estimators=estimators)

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        scores = np.column_stack([e.predict_proba(features) for e in self.estimators])
        return scores / scores.sum(axis=1, keepdims=True)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(self.classes)[np.argmax(self.predict_proba(features), axis=1)]


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve from the rank statistic, ties averaged."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("roc auc needs both classes")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


class EvaluationReport(BaseModel):
    accuracy: float
    roc_auc: float
    n_samples: int
    version: str = __version__


def evaluate(
    classifier: LogisticClassifier | OneVsRestClassifier,
    features: Sequence[FeatureVector] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
) -> EvaluationReport:
    """Accuracy and ROC-AUC, one-vs-rest macro averaged for several classes."""
    x = _features_array(features)
    labels = np.asarray(labels)
    if isinstance(classifier, OneVsRestClassifier):
        probs = classifier.predict_proba(x)
        predicted = np.asarray(classifier.classes)[np.argmax(probs, axis=1)]
        aucs = [
            roc_auc(probs[:, idx], labels == c)
            for idx, c in enumerate(classifier.classes)
            if 0 < np.sum(labels == c) < labels.size
        ]
        auc = float(np.mean(aucs)) if aucs else float("nan")
    else:
        scores = classifier.decision_function(x)
        predicted = (scores >= 0.0).astype(int)
        auc = roc_auc(scores, labels)
    return EvaluationReport(
        accuracy=float(np.mean(predicted == labels)),
        roc_auc=auc,
        n_samples=int(labels.size),
    )
