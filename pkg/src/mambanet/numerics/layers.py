"""Layer containers and their forward passes.

All forward functions accept either a single example or a leading batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ContractError, DegenerateInputError, DimensionError
from . import tensor as T
from .tensor import Parameter, Tensor

KINDS = ("dense", "conv1d", "lstm", "activation")
ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh")


@dataclass
class Layer:
    kind: str
    params: dict[str, Parameter] = field(default_factory=dict)
    activation: str = "linear"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")
        self._check_shapes()

    def _check_shapes(self):
        p = self.params
        if self.kind == "dense":
            w, b = p["weight"].shape, p["bias"].shape
            if len(w) != 2 or b != (w[0],):
                raise DimensionError(f"dense weight {w} inconsistent with bias {b}")
        elif self.kind == "conv1d":
            w, b = p["weight"].shape, p["bias"].shape
            if len(w) != 3 or b != (w[0],):
                raise DimensionError(f"conv1d weight {w} inconsistent with bias {b}")
        elif self.kind == "lstm":
            w, b = p["weight"].shape, p["bias"].shape
            if len(w) != 2 or w[0] % 4 or b != (w[0],) or w[1] <= w[0] // 4:
                raise DimensionError(f"lstm weight {w} inconsistent with bias {b}")
        elif p:
            raise ContractError("activation layers carry no parameters")

    @property
    def in_features(self) -> int:
        if self.kind == "dense":
            return self.params["weight"].shape[1]
        if self.kind == "conv1d":
            return self.params["weight"].shape[1]
        if self.kind == "lstm":
            return self.params["weight"].shape[1] - self.hidden_size
        raise ContractError("activation layers have no fixed width")

    @property
    def out_features(self) -> int:
        if self.kind == "lstm":
            return self.hidden_size
        return self.params["weight"].shape[0]

    @property
    def hidden_size(self) -> int:
        return self.params["weight"].shape[0] // 4

    @property
    def kernel_size(self) -> int:
        return self.params["weight"].shape[2]

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def freeze(self):
        for p in self.params.values():
            p.trainable = False

    def unfreeze(self):
        for p in self.params.values():
            p.trainable = True

    @property
    def frozen(self) -> bool:
        return bool(self.params) and not any(p.trainable for p in self.params.values())

    def n_params(self) -> int:
        return int(np.sum([p.size for p in self.params.values()])) if self.params else 0

    def __call__(self, x, **kwargs):
        return forward(self, x, **kwargs)


def activate(x: Tensor, name: str) -> Tensor:
    if name == "linear":
        return x
    if name == "relu":
        return T.relu(x)
    if name == "sigmoid":
        return T.sigmoid(x)
    if name == "tanh":
        return T.tanh(x)
    raise ContractError(f"unknown activation {name!r}")


def dense_forward(x: Tensor, layer: Layer) -> Tensor:
    w = layer.params["weight"]
    if x.shape[-1] != w.shape[1]:
        raise DimensionError(f"dense input shape {x.shape} incompatible with weight shape {w.shape}")
    return activate(T.linear(x, w, layer.params["bias"]), layer.activation)


def conv1d_forward(x: Tensor, layer: Layer) -> Tensor:
    """Valid cross-correlation; input (channels, length) or (batch, channels, length)."""
    w = layer.params["weight"]
    single = x.data.ndim == 2
    if single:
        x = T.reshape(x, (1,) + x.shape)
    if x.data.ndim != 3 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv1d input shape {x.shape} incompatible with weight shape {w.shape}")
    if x.shape[2] < w.shape[2]:
        raise DegenerateInputError(f"sequence length {x.shape[2]} shorter than kernel {w.shape[2]}")
    y = activate(T.conv1d(x, w, layer.params["bias"]), layer.activation)
    return T.reshape(y, y.shape[1:]) if single else y


def lstm_forward(x, layer: Layer) -> Tensor:
    """Final hidden state of an LSTM run from zero state.

    ``x`` is a sequence of Tensors (each ``[features]`` or ``[batch, features]``)
    or a single Tensor shaped ``[time, features]`` / ``[batch, time, features]``.
    Gate order in the stacked weight is input, forget, candidate, output.
    """
    if isinstance(x, Tensor):
        if x.data.ndim == 2:
            steps = [x[t] for t in range(x.shape[0])]
        elif x.data.ndim == 3:
            steps = [x[:, t, :] for t in range(x.shape[1])]
        else:
            raise DimensionError(f"lstm input must be 2-D or 3-D, got shape {x.shape}")
    else:
        steps = list(x)
    if not steps:
        raise DegenerateInputError("lstm needs a nonempty sequence")
    w, b = layer.params["weight"], layer.params["bias"]
    hidden = layer.hidden_size
    n_in = w.shape[1] - hidden
    lead = steps[0].shape[:-1]
    for s in steps:
        if s.shape[-1] != n_in or s.shape[:-1] != lead:
            raise DimensionError(f"lstm step shape {s.shape} incompatible with weight shape {w.shape}")
    h = Tensor(np.zeros(lead + (hidden,)))
    c = Tensor(np.zeros(lead + (hidden,)))
    idx = [slice(k * hidden, (k + 1) * hidden) for k in range(4)]
    for x_t in steps:
        z = T.linear(T.concat([x_t, h], axis=-1), w, b)
        i = T.sigmoid(z[..., idx[0]])
        f = T.sigmoid(z[..., idx[1]])
        g = T.tanh(z[..., idx[2]])
        o = T.sigmoid(z[..., idx[3]])
        c = f * c + i * g
        h = o * T.tanh(c)
    return h


def forward(layer: Layer, x, **kwargs) -> Tensor:
    if layer.kind == "dense":
        return dense_forward(x, layer)
    if layer.kind == "conv1d":
        return conv1d_forward(x, layer)
    if layer.kind == "lstm":
        return lstm_forward(x, layer)
    return activate(x, layer.activation)


def run_sequential(layers: Sequence[Layer], x: Tensor) -> Tensor:
    for layer in layers:
        x = forward(layer, x)
    return x


# ---------------------------------------------------------------- init

def dense(n_in: int, n_out: int, rng: np.random.Generator, activation: str = "linear",
          name: str = "dense") -> Layer:
    """Glorot-uniform weights (He-uniform for ReLU), zero bias."""
    fan = 6.0 / n_in if activation == "relu" else 6.0 / (n_in + n_out)
    limit = np.sqrt(fan)
    w = rng.uniform(-limit, limit, size=(n_out, n_in))
    return Layer("dense", {"weight": Parameter(w, f"{name}.weight"),
                           "bias": Parameter(np.zeros(n_out), f"{name}.bias")}, activation)


def conv1d(channels: int, filters: int, kernel: int, rng: np.random.Generator,
           activation: str = "linear", name: str = "conv1d") -> Layer:
    fan_in = channels * kernel
    limit = np.sqrt(6.0 / fan_in) if activation == "relu" else np.sqrt(6.0 / (fan_in + filters * kernel))
    w = rng.uniform(-limit, limit, size=(filters, channels, kernel))
    return Layer("conv1d", {"weight": Parameter(w, f"{name}.weight"),
                            "bias": Parameter(np.zeros(filters), f"{name}.bias")}, activation)


def lstm(n_in: int, hidden: int, rng: np.random.Generator, name: str = "lstm") -> Layer:
    limit = 1.0 / np.sqrt(hidden)
    w = rng.uniform(-limit, limit, size=(4 * hidden, n_in + hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget-gate bias
    return Layer("lstm", {"weight": Parameter(w, f"{name}.weight"),
                          "bias": Parameter(b, f"{name}.bias")})
