from crosspers.crossripsnet.model import CrnModel, CrnModelConfig, deepsets_encode
from crosspers.crossripsnet.reducers import (
    DistanceReducerType,
    PcaReducer,
    QuantileReducer,
    TopKMaxReducer,
    distance_features,
)
from crosspers.crossripsnet.training import (
    TrainingConfig,
    grad_check,
    kl_loss,
    predict_mtd_density,
    sym_kl,
    train,
)

__all__ = [
    "CrnModel",
    "CrnModelConfig",
    "DistanceReducerType",
    "PcaReducer",
    "QuantileReducer",
    "TopKMaxReducer",
    "TrainingConfig",
    "deepsets_encode",
    "distance_features",
    "grad_check",
    "kl_loss",
    "predict_mtd_density",
    "sym_kl",
    "train",
]
