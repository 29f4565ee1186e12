"""Gradient descent and Adam updates applied in place to trainable parameters."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from ..errors import ContractError, DimensionError, NonFiniteError
from .tensor import Parameter


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "adam"  # "adam" | "sgd"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd"):
            raise ContractError(f"unknown optimizer {self.algorithm!r}")
        if not self.lr > 0:
            raise ContractError("learning rate must be positive")


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params: Iterable[Parameter], grads: Mapping[Parameter, np.ndarray],
                   config: OptimizerConfig, state: OptimizerState | None = None) -> OptimizerState:
    """Update every trainable parameter in ``params`` that has a gradient.

    Frozen parameters are skipped without being touched. All gradients are
    validated before any parameter moves, so a bad gradient leaves the model
    as it was.
    """
    state = state if state is not None else OptimizerState()
    live = [p for p in params if p.trainable and p in grads]
    for p in live:
        g = grads[p]
        if g.shape != p.data.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter {p.name!r} shape {p.data.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {p.name!r}; training aborted")
    state.step += 1
    if config.algorithm == "sgd":
        for p in live:
            p.data -= config.lr * grads[p]
        return state
    t = state.step
    c1 = 1.0 - config.beta1 ** t
    c2 = 1.0 - config.beta2 ** t
    for p in live:
        g = grads[p]
        key = id(p)
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(g)
            state.v[key] = np.zeros_like(g)
        v = state.v[key]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        p.data -= config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return state


class Optimizer:
    """Binds a parameter list, a config and its moment state."""

    def __init__(self, params: Iterable[Parameter], config: OptimizerConfig | None = None):
        self.params = list(params)
        self.config = config or OptimizerConfig()
        self.state = OptimizerState()

    def scale_lr(self, factor: float):
        self.config = replace(self.config, lr=self.config.lr * factor)

    def step(self, grads: Mapping[Parameter, np.ndarray]):
        optimizer_step(self.params, grads, self.config, self.state)
