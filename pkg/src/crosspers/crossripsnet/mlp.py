from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass(slots=True)
class MlpCache:
    inputs: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)


@dataclass(slots=True)
class MlpParams:
    """Fully connected relu network on row vectors.

    ``weights[l]`` has shape ``(fan_in, fan_out)``. Hidden layers use relu,
    the last layer only if ``final_activation`` is set.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    final_activation: bool = True

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("an mlp needs one bias per weight matrix")
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases, strict=True)):
            if bias.shape != (weight.shape[1],):
                raise ValueError(f"bias of layer {layer} does not match its weights")
            if layer and self.weights[layer - 1].shape[1] != weight.shape[0]:
                raise ValueError(f"layer {layer} input does not match layer {layer - 1}")

    @classmethod
    def init(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator,
        final_activation: bool = True,
        final_scale: float = 1.0,
    ) -> MlpParams:
        """Uniform initialisation in ``+-1/sqrt(fan_in)``, biases at zero."""
        if len(sizes) < 2:
            raise ValueError("an mlp needs at least input and output size")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:], strict=True):
            limit = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        weights[-1] *= final_scale
        return cls(weights=weights, biases=biases, final_activation=final_activation)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0], *(w.shape[1] for w in self.weights)]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def _activated(self, layer: int) -> bool:
        return layer < len(self.weights) - 1 or self.final_activation

    def parameters(self) -> Iterator[np.ndarray]:
        for weight, bias in zip(self.weights, self.biases, strict=True):
            yield weight
            yield bias

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
        cache = MlpCache()
        hidden = x
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases, strict=True)):
            cache.inputs.append(hidden)
            pre = hidden @ weight + bias
            cache.pre_activations.append(pre)
            hidden = relu(pre) if self._activated(layer) else pre
        return hidden, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: MlpCache, grad: np.ndarray
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Backpropagate ``grad`` of the output.

        Returns:
            tuple: Gradient of the input and parameter gradients in the order
                of :meth:`parameters`.
        """
        grads: list[np.ndarray] = [np.empty(0)] * (2 * len(self.weights))
        for layer in reversed(range(len(self.weights))):
            if self._activated(layer):
                grad = grad * (cache.pre_activations[layer] > 0.0)
            grads[2 * layer] = cache.inputs[layer].T @ grad
            grads[2 * layer + 1] = grad.sum(axis=0)
            grad = grad @ self.weights[layer].T
        return grad, grads

    def relu_masks(self, cache: MlpCache) -> list[np.ndarray]:
        return [
            pre > 0.0
            for layer, pre in enumerate(cache.pre_activations)
            if self._activated(layer)
        ]

    def to_dict(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "final_activation": self.final_activation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> MlpParams:
        return cls(
            weights=[np.array(w, dtype=float) for w in data["weights"]],
            biases=[np.array(b, dtype=float) for b in data["biases"]],
            final_activation=bool(data["final_activation"]),
        )


@dataclass(slots=True)
class DeepSetsCache:
    n_points: int
    phi1: MlpCache
    phi2: MlpCache
    pooled: np.ndarray


@dataclass(slots=True)
class DeepSets:
    """Permutation-invariant set encoder ``phi2(pool(phi1(x)))``."""

    phi1: MlpParams
    phi2: MlpParams
    pooling: str = "sum"

    def __post_init__(self) -> None:
        if self.phi1.output_dim != self.phi2.input_dim:
            raise ValueError("phi1 output does not match phi2 input")
        if self.pooling not in ("sum", "mean"):
            raise ValueError(f"unknown pooling {self.pooling!r}")

    @property
    def input_dim(self) -> int:
        return self.phi1.input_dim

    @property
    def output_dim(self) -> int:
        return self.phi2.output_dim

    def parameters(self) -> Iterator[np.ndarray]:
        yield from self.phi1.parameters()
        yield from self.phi2.parameters()

    def forward(self, rows: np.ndarray) -> tuple[np.ndarray, DeepSetsCache]:
        """Encode canonically ordered rows into one ``(1, output_dim)`` vector."""
        features, phi1_cache = self.phi1.forward(rows)
        pooled = features.sum(axis=0, keepdims=True)
        if self.pooling == "mean":
            pooled = pooled / rows.shape[0]
        encoded, phi2_cache = self.phi2.forward(pooled)
        return encoded, DeepSetsCache(rows.shape[0], phi1_cache, phi2_cache, pooled)

    def backward(self, cache: DeepSetsCache, grad: np.ndarray) -> list[np.ndarray]:
        grad_pooled, phi2_grads = self.phi2.backward(cache.phi2, grad)
        if self.pooling == "mean":
            grad_pooled = grad_pooled / cache.n_points
        grad_features = np.repeat(grad_pooled, cache.n_points, axis=0)
        _, phi1_grads = self.phi1.backward(cache.phi1, grad_features)
        return phi1_grads + phi2_grads

    def relu_masks(self, cache: DeepSetsCache) -> list[np.ndarray]:
        return self.phi1.relu_masks(cache.phi1) + self.phi2.relu_masks(cache.phi2)

    def to_dict(self) -> dict:
        return {
            "phi1": self.phi1.to_dict(),
            "phi2": self.phi2.to_dict(),
            "pooling": self.pooling,
        }

    @classmethod
    def from_dict(cls, data: dict) -> DeepSets:
        return cls(
            phi1=MlpParams.from_dict(data["phi1"]),
            phi2=MlpParams.from_dict(data["phi2"]),
            pooling=data.get("pooling", "sum"),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def softmax_backward(probs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return probs * (grad - np.dot(probs, grad))
