"""Cross-RipsNet: DeepSets encoders of two clouds and a density head.

Variants select the encoder blocks feeding the head:

* ``a_merged``: the union of both clouds.
* ``b_dual``: the union, the left and the right cloud.
* ``c_dual_with_distance``: additionally the reduced rows of the cross
  distance matrix.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

import numpy as np
from pydantic import BaseModel, Field, PositiveInt
from typing_extensions import Self

from crosspers import __version__
from crosspers.crossripsnet.mlp import (
    DeepSets,
    DeepSetsCache,
    MlpCache,
    MlpParams,
    softmax,
)
from crosspers.crossripsnet.reducers import DistanceReducerType, QuantileReducer
from crosspers.geometry import cross_distance_matrix
from crosspers.models.cloud import DimensionMismatchError, PointCloud
from crosspers.summaries import DensityGrid, GridSpec
from crosspers.utils import get_rng

logger = logging.getLogger(__name__)

Variant = Literal["a_merged", "b_dual", "c_dual_with_distance"]
Block = Literal["combined", "left", "right", "distance"]

VARIANT_BLOCKS: dict[str, tuple[Block, ...]] = {
    "a_merged": ("combined",),
    "b_dual": ("combined", "left", "right"),
    "c_dual_with_distance": ("combined", "left", "right", "distance"),
}


class CrnModelConfig(BaseModel):
    variant: Variant = Field(
        default="c_dual_with_distance",
        description="Encoder blocks feeding the head.",
    )
    reducer: DistanceReducerType = Field(
        default_factory=QuantileReducer,
        description="Distance matrix reducer of the distance block.",
    )
    right_encoder: bool = Field(
        default=True,
        description="Encode the right cloud separately. Disable for the "
        "single-cloud ablation.",
    )
    phi1_sizes: list[PositiveInt] = Field(
        default=[64, 128],
        min_length=1,
        description="Hidden and output sizes of the per-point network.",
    )
    phi2_sizes: list[PositiveInt] = Field(
        default=[64],
        min_length=1,
        description="Sizes of the network applied to the pooled features.",
    )
    head_hidden: list[PositiveInt] = Field(
        default=[256],
        description="Hidden sizes of the head, empty for a linear head.",
    )
    pooling: Literal["sum", "mean"] = Field(
        default="sum",
        description="Set pooling of the encoders.",
    )
    grid: GridSpec = Field(
        default_factory=GridSpec,
        description="Output grid. ny = 1 predicts 1-D MTD densities.",
    )

    def blocks(self) -> tuple[Block, ...]:
        blocks = VARIANT_BLOCKS[self.variant]
        if not self.right_encoder:
            blocks = tuple(block for block in blocks if block != "right")
        return blocks


def canonical_order(rows: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically, fixing the pooling summation order."""
    if rows.shape[0] <= 1:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def deepsets_encode(cloud: PointCloud, phi1: MlpParams, phi2: MlpParams) -> np.ndarray:
    """``phi2(sum_x phi1(x))`` of a cloud, independent of the point order.

    Raises:
        DimensionMismatchError: If the point dimension does not match ``phi1``.
    """
    if cloud.dim != phi1.input_dim:
        raise DimensionMismatchError(
            f"cloud dimension {cloud.dim} does not match encoder input {phi1.input_dim}"
        )
    encoder = DeepSets(phi1, phi2)
    encoded, _ = encoder.forward(canonical_order(cloud.points))
    return encoded[0]


@dataclass(slots=True)
class ForwardCache:
    block_inputs: dict[str, np.ndarray]
    block_caches: dict[str, DeepSetsCache]
    head_cache: MlpCache
    logits: np.ndarray
    probs: np.ndarray


@dataclass(slots=True)
class CrnModel:
    config: CrnModelConfig
    input_dim: int
    encoders: dict[str, DeepSets]
    head: MlpParams
    metadata: dict = field(default_factory=dict)

    @classmethod
    def new(cls, config: CrnModelConfig, input_dim: int, seed: int = 0) -> Self:
        """Randomly initialised model for clouds of dimension ``input_dim``."""
        rng = get_rng(seed)
        encoders = {}
        for block in config.blocks():
            block_input = config.reducer.k if block == "distance" else input_dim
            phi1 = MlpParams.init([block_input, *config.phi1_sizes], rng)
            phi2 = MlpParams.init([config.phi1_sizes[-1], *config.phi2_sizes], rng)
            encoders[block] = DeepSets(phi1, phi2, pooling=config.pooling)
        head_input = sum(encoder.output_dim for encoder in encoders.values())
        head = MlpParams.init(
            [head_input, *config.head_hidden, config.grid.n_cells],
            rng,
            final_activation=False,
            final_scale=0.1,
        )
        logger.debug(
            "new %s model with blocks %s, %d parameters",
            config.variant,
            ", ".join(encoders),
            sum(p.size for p in cls._iter_params(encoders, head)),
        )
        return cls(config=config, input_dim=input_dim, encoders=encoders, head=head)

    @staticmethod
    def _iter_params(
        encoders: dict[str, DeepSets], head: MlpParams
    ) -> Iterator[np.ndarray]:
        for encoder in encoders.values():
            yield from encoder.parameters()
        yield from head.parameters()

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order, shared with the gradients."""
        return list(self._iter_params(self.encoders, self.head))

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    @property
    def grid(self) -> GridSpec:
        return self.config.grid

    def block_inputs(self, left: PointCloud, right: PointCloud) -> dict[str, np.ndarray]:
        for cloud in (left, right):
            if cloud.dim != self.input_dim:
                raise DimensionMismatchError(
                    f"cloud dimension {cloud.dim} does not match "
                    f"the model input dimension {self.input_dim}"
                )
        inputs = {}
        for block in self.encoders:
            match block:
                case "combined":
                    rows = np.vstack((left.points, right.points))
                case "left":
                    rows = left.points
                case "right":
                    rows = right.points
                case "distance":
                    cross = cross_distance_matrix(left, right)
                    rows = self.config.reducer.transform(cross)
            inputs[block] = canonical_order(np.asarray(rows, dtype=float))
        return inputs

    def forward_cached(
        self,
        left: PointCloud,
        right: PointCloud,
        inputs: dict[str, np.ndarray] | None = None,
    ) -> ForwardCache:
        inputs = inputs if inputs is not None else self.block_inputs(left, right)
        features, caches = [], {}
        for block, encoder in self.encoders.items():
            encoded, caches[block] = encoder.forward(inputs[block])
            features.append(encoded)
        logits, head_cache = self.head.forward(np.hstack(features))
        logits = logits[0]
        return ForwardCache(
            block_inputs=inputs,
            block_caches=caches,
            head_cache=head_cache,
            logits=logits,
            probs=softmax(logits),
        )

    def forward(self, left: PointCloud, right: PointCloud) -> DensityGrid:
        """Predicted normalized density on the model grid."""
        probs = self.forward_cached(left, right).probs
        return DensityGrid(spec=self.grid, values=probs, normalized=True)

    def backward(self, cache: ForwardCache, grad_logits: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients for a gradient of the logits, in parameter order."""
        grad_features, head_grads = self.head.backward(
            cache.head_cache, grad_logits[np.newaxis, :]
        )
        grads: list[np.ndarray] = []
        offset = 0
        for block, encoder in self.encoders.items():
            width = encoder.output_dim
            grads.extend(
                encoder.backward(
                    cache.block_caches[block],
                    grad_features[:, offset : offset + width],
                )
            )
            offset += width
        return grads + head_grads

    def relu_masks(self, cache: ForwardCache) -> list[np.ndarray]:
        masks = []
        for block, encoder in self.encoders.items():
            masks.extend(encoder.relu_masks(cache.block_caches[block]))
        masks.extend(self.head.relu_masks(cache.head_cache))
        return masks

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.model_dump(mode="json"),
            "input_dim": self.input_dim,
            "encoders": {name: enc.to_dict() for name, enc in self.encoders.items()},
            "head": self.head.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Self:
        config = CrnModelConfig.model_validate(data["config"])
        encoders = {
            name: DeepSets.from_dict(enc) for name, enc in data["encoders"].items()
        }
        if tuple(encoders) != config.blocks():
            raise ValueError(
                f"model encoders {tuple(encoders)} do not match "
                f"variant blocks {config.blocks()}"
            )
        return cls(
            config=config,
            input_dim=int(data["input_dim"]),
            encoders=encoders,
            head=MlpParams.from_dict(data["head"]),
            metadata=data.get("metadata", {}),
        )

    def save(self, file: Path) -> None:
        logger.info("saving model to %s", file)
        file.write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, file: Path) -> Self:
        if not file.exists():
            raise FileNotFoundError(f"model file {file} does not exist")
        logger.info("loading model from %s", file)
        return cls.from_dict(json.loads(file.read_text()))
