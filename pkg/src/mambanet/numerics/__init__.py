"""Float64 tensors, reverse-mode differentiation, layers and optimizers."""
from . import container
from .layers import (Layer, conv1d_forward, dense_forward, forward, lstm_forward,
                     run_sequential)
from .optim import Optimizer, OptimizerConfig, OptimizerState, optimizer_step
from .tensor import GradientTape, Parameter, Tensor, backward, bce_loss, mse_loss

__all__ = [
    "Tensor", "Parameter", "GradientTape", "backward", "bce_loss", "mse_loss",
    "Layer", "dense_forward", "conv1d_forward", "lstm_forward", "forward", "run_sequential",
    "Optimizer", "OptimizerConfig", "OptimizerState", "optimizer_step", "container",
]
