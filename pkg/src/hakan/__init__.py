"""Time series forecasting with Hahn-polynomial Kolmogorov-Arnold networks."""

from .basis import ChebyshevBasis, HahnBasis, LucasBasis, make_basis
from .layers import DomainMap, KanLayer
from .model import (
    HaKanModel,
    ModelConfig,
    make_patches,
    model_param_count,
    revin_denormalize,
    revin_normalize,
)
from .tensor import Tensor, backward, no_grad
from .training import Adam, MetricRecord, TrainSpec, grad_check, mae_metric, mse_loss, train

__all__ = [
    "Adam",
    "ChebyshevBasis",
    "DomainMap",
    "HaKanModel",
    "HahnBasis",
    "KanLayer",
    "LucasBasis",
    "MetricRecord",
    "ModelConfig",
    "Tensor",
    "TrainSpec",
    "backward",
    "grad_check",
    "mae_metric",
    "make_basis",
    "make_patches",
    "model_param_count",
    "mse_loss",
    "no_grad",
    "revin_denormalize",
    "revin_normalize",
    "train",
]

__version__ = "0.1.0"
