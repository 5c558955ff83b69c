from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field, NonNegativeFloat, NonNegativeInt, PositiveInt

from crosspers.crossripsnet.model import CrnModel
from crosspers.crossripsnet.mlp import softmax_backward
from crosspers.geometry import cross_distance_matrix
from crosspers.jobs import map_ordered
from crosspers.models.cloud import DimensionMismatchError, PointCloud
from crosspers.summaries import DensityGrid, EmptyDatasetError
from crosspers.utils import format_float, get_rng

logger = logging.getLogger(__name__)

KL_EPSILON = 1e-8
GRAD_CHECK_STEP = 1e-5
GRAD_CHECK_FLOOR = 1e-5


def _smoothed(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel() + KL_EPSILON
    return values / values.sum()


def _as_values(grid: DensityGrid | np.ndarray) -> np.ndarray:
    return grid.values if isinstance(grid, DensityGrid) else np.asarray(grid)


def kl_loss(pred: DensityGrid | np.ndarray, target: DensityGrid | np.ndarray) -> float:
    """``KL(target || pred)`` after adding 1e-8 to both and renormalizing.

    Raises:
        DimensionMismatchError: If the grids differ in shape.
    """
    pred_values, target_values = _as_values(pred), _as_values(target)
    if pred_values.shape != target_values.shape:
        raise DimensionMismatchError(
            f"grid shapes differ: {pred_values.shape} != {target_values.shape}"
        )
    p, t = _smoothed(pred_values), _smoothed(target_values)
    return float(np.sum(t * (np.log(t) - np.log(p))))


def sym_kl(pred: DensityGrid | np.ndarray, target: DensityGrid | np.ndarray) -> float:
    return kl_loss(pred, target) + kl_loss(target, pred)


def kl_grad(probs: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of :func:`kl_loss` with respect to the unsmoothed prediction."""
    shifted = probs + KL_EPSILON
    return -_smoothed(target) / shifted + 1.0 / shifted.sum()


@dataclass(frozen=True, slots=True)
class CrnSample:
    left: PointCloud
    right: PointCloud
    target: DensityGrid


class TrainingConfig(BaseModel):
    learning_rate: NonNegativeFloat = Field(
        default=1e-3,
        description="Step size of the optimizer.",
    )
    epochs: PositiveInt = Field(default=100, description="Passes over the data.")
    batch_size: PositiveInt = Field(default=8, description="Samples per step.")
    seed: int = Field(default=0, description="Seed of initialisation and shuffling.")
    optimizer: Literal["adam", "sgd"] = Field(
        default="adam",
        description="Adaptive per-parameter steps or plain gradient descent.",
    )
    loss: Literal["kl"] = "kl"
    train_fraction: float = Field(
        default=0.8,
        gt=0.0,
        le=1.0,
        description="Fraction of the samples used for training.",
    )
    n_jobs: NonNegativeInt = Field(
        default=1,
        description="Concurrent per-sample gradient jobs, 0 uses all CPUs.",
    )


class Optimizer:
    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        raise NotImplementedError


class Sgd(Optimizer):
    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for param, grad in zip(params, grads, strict=True):
            param -= self.learning_rate * grad


class Adam(Optimizer):
    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        super().__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.n_steps = 0
        self._m: list[np.ndarray] = []
        self._v: list[np.ndarray] = []

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.n_steps += 1
        correction1 = 1.0 - self.beta1**self.n_steps
        correction2 = 1.0 - self.beta2**self.n_steps
        for param, grad, m, v in zip(params, grads, self._m, self._v, strict=True):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            param -= (
                self.learning_rate
                * (m / correction1)
                / (np.sqrt(v / correction2) + self.eps)
            )


def make_optimizer(config: TrainingConfig) -> Optimizer:
    match config.optimizer:
        case "adam":
            return Adam(config.learning_rate)
        case "sgd":
            return Sgd(config.learning_rate)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def loss_and_grads(model: CrnModel, sample: CrnSample) -> tuple[float, list[np.ndarray]]:
    cache = model.forward_cached(sample.left, sample.right)
    target = sample.target.values.ravel()
    loss = kl_loss(cache.probs, target)
    grad_logits = softmax_backward(cache.probs, kl_grad(cache.probs, target))
    return loss, model.backward(cache, grad_logits)


def sample_loss(model: CrnModel, sample: CrnSample) -> float:
    probs = model.forward_cached(sample.left, sample.right).probs
    return kl_loss(probs, sample.target.values.ravel())


def _check_targets(model: CrnModel, samples: Sequence[CrnSample]) -> None:
    for idx, sample in enumerate(samples):
        if sample.target.shape != model.grid.shape:
            raise DimensionMismatchError(
                f"target {idx} has shape {sample.target.shape}, "
                f"model grid is {model.grid.shape}"
            )
        if not sample.target.normalized:
            raise ValueError(f"target {idx} is not normalized")


def fit_reducer(model: CrnModel, samples: Sequence[CrnSample]) -> None:
    reducer = model.config.reducer
    if "distance" in model.encoders and not reducer.is_fitted:
        reducer.fit([cross_distance_matrix(s.left, s.right) for s in samples])


@dataclass(slots=True)
class TrainingResult:
    model: CrnModel
    history: list[float]

    def history_csv(self, file: Path) -> None:
        lines = ["epoch,train_loss\n"]
        lines.extend(
            f"{epoch},{format_float(loss)}\n"
            for epoch, loss in enumerate(self.history, start=1)
        )
        file.write_text("".join(lines))


def train(
    model: CrnModel,
    samples: Sequence[CrnSample],
    config: TrainingConfig | None = None,
) -> TrainingResult:
    """Minibatch training on the KL divergence of the predicted densities.

    The input model is not modified. Batches are shuffled with a generator
    seeded by ``config.seed``; per-sample gradients are summed in sample order.

    Raises:
        EmptyDatasetError: If no samples are given.
    """
    config = config or TrainingConfig()
    if not samples:
        raise EmptyDatasetError("cannot train on an empty dataset")
    _check_targets(model, samples)
    model = copy.deepcopy(model)
    fit_reducer(model, samples)

    params = model.parameters()
    optimizer = make_optimizer(config)
    rng = get_rng(config.seed, 1)
    history = []
    logger.info(
        "training %s on %d samples for %d epochs",
        model.config.variant,
        len(samples),
        config.epochs,
    )
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        epoch_loss = 0.0
        for start in range(0, len(samples), config.batch_size):
            batch = [samples[idx] for idx in order[start : start + config.batch_size]]
            results = map_ordered(
                [partial(loss_and_grads, model, sample) for sample in batch],
                n_jobs=config.n_jobs,
                label="gradients",
            )
            grads = [np.zeros_like(p) for p in params]
            for loss, sample_grads in results:
                epoch_loss += loss
                for total, grad in zip(grads, sample_grads, strict=True):
                    total += grad
            optimizer.step(params, [grad / len(batch) for grad in grads])
        history.append(epoch_loss / len(samples))
        if epoch % max(config.epochs // 10, 1) == 0:
            logger.debug("epoch %d: train loss %.5f", epoch + 1, history[-1])

    logger.info("final train loss %.5f", history[-1])
    model.metadata["history"] = history
    return TrainingResult(model=model, history=history)


def evaluate_sym_kl(model: CrnModel, samples: Sequence[CrnSample]) -> float:
    """Mean symmetric KL between predictions and targets."""
    if not samples:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    return float(
        np.mean([sym_kl(model.forward(s.left, s.right), s.target) for s in samples])
    )


def train_test_split(
    samples: Sequence[CrnSample],
    train_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[list[CrnSample], list[CrnSample]]:
    order = get_rng(seed, 2).permutation(len(samples))
    n_train = max(1, int(round(train_fraction * len(samples))))
    return (
        [samples[idx] for idx in order[:n_train]],
        [samples[idx] for idx in order[n_train:]],
    )


def predict_mtd_density(
    model: CrnModel, left: PointCloud, right: PointCloud
) -> DensityGrid:
    """Predicted 1-D MTD density curve.

    Raises:
        ValueError: If the model grid is not one-dimensional along x.
    """
    if model.grid.ny != 1:
        raise ValueError(
            f"model predicts a {model.grid.nx}x{model.grid.ny} grid, "
            "MTD densities need ny = 1"
        )
    return model.forward(left, right)


def grad_check(
    model: CrnModel,
    sample: CrnSample,
    n_checks: int = 64,
    seed: int = 0,
    subset: Literal["all", "head"] = "all",
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Parameters whose perturbation flips any relu activation are skipped.

    Args:
        model: Model to check, restored after checking.
        sample: Input pair and target.
        n_checks: Number of randomly drawn parameter entries.
        seed: Seed of the draw.
        subset: Draw from all parameters or only from the head.

    Returns:
        float: Max of ``|a - n| / max(|a| + |n|, 1e-5)`` over checked entries.
    """
    fit_reducer(model, [sample])
    _, grads = loss_and_grads(model, sample)
    params = model.parameters()
    inputs = model.block_inputs(sample.left, sample.right)
    base_masks = model.relu_masks(model.forward_cached(sample.left, sample.right, inputs))

    candidates = range(len(params))
    if subset == "head":
        candidates = range(len(params) - 2 * len(model.head.weights), len(params))
    candidates = [idx for idx in candidates if params[idx].size]
    sizes = np.array([params[idx].size for idx in candidates], dtype=float)

    rng = get_rng(seed)
    max_error = 0.0
    n_skipped = 0
    for _ in range(n_checks):
        param_idx = candidates[rng.choice(len(candidates), p=sizes / sizes.sum())]
        param = params[param_idx]
        flat_idx = np.unravel_index(int(rng.integers(param.size)), param.shape)
        original = param[flat_idx]

        losses, stable = [], True
        for step in (GRAD_CHECK_STEP, -GRAD_CHECK_STEP):
            param[flat_idx] = original + step
            cache = model.forward_cached(sample.left, sample.right, inputs)
            masks = model.relu_masks(cache)
            stable &= all(np.array_equal(a, b) for a, b in zip(masks, base_masks, strict=True))
            losses.append(kl_loss(cache.probs, sample.target.values.ravel()))
        param[flat_idx] = original
        if not stable:
            n_skipped += 1
            continue

        numeric = (losses[0] - losses[1]) / (2.0 * GRAD_CHECK_STEP)
        analytic = grads[param_idx][flat_idx]
        error = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), GRAD_CHECK_FLOOR)
        max_error = max(max_error, error)

    logger.info(
        "gradient check: max relative error %.2e, %d of %d near relu kinks skipped",
        max_error,
        n_skipped,
        n_checks,
    )
    return float(max_error)
