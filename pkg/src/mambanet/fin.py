"""Feature imitating networks: synthetic signals, label oracles, training and surgery.

A FIN is a 64-32-16-8-4 dense stack with a one-unit sigmoid head, regressed
onto a closed-form statistic of a short signal. After training, the first
three layers are frozen, the fourth stays trainable and the last two are cut
away, leaving an 8-wide embedding extractor.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError
from .numerics import container
from .numerics import tensor as T
from .numerics.layers import Layer, dense, run_sequential
from .numerics.optim import Optimizer, OptimizerConfig
from .numerics.tensor import GradientTape, Tensor, backward

log = logging.getLogger(__name__)

SIGNAL_LENGTH = 10
WIDTHS = (64, 32, 16, 8, 4, 1)
ACTIVATIONS = ("relu", "relu", "linear", "linear", "linear", "sigmoid")
N_FROZEN = 3
EMBED_DIM = WIDTHS[3]
VARIANCE_FLOOR = 1e-12


class FeatureKind(str, Enum):
    MEAN = "mean"
    STD = "std"
    VARIANCE = "variance"
    SKEWNESS = "skewness"


ALL_KINDS = tuple(FeatureKind)


def oracle_feature(signal, kind: FeatureKind | str) -> float:
    """Handcrafted statistic of one signal, population (1/L) moments."""
    return float(oracle_features(np.asarray(signal, dtype=np.float64)[None, :], kind)[0])


def oracle_features(signals: np.ndarray, kind: FeatureKind | str) -> np.ndarray:
    """Row-wise statistic of a (count, L) array."""
    kind = FeatureKind(kind)
    x = np.asarray(signals, dtype=np.float64)
    mu = x.mean(axis=1)
    if kind is FeatureKind.MEAN:
        return mu
    d = x - mu[:, None]
    m2 = (d * d).mean(axis=1)
    if kind is FeatureKind.VARIANCE:
        return m2
    if kind is FeatureKind.STD:
        return np.sqrt(m2)
    m3 = (d * d * d).mean(axis=1)
    flat = m2 < VARIANCE_FLOOR
    safe = np.where(flat, 1.0, m2)
    return np.where(flat, 0.0, m3 / safe ** 1.5)


def _draw(count: int, length: int, rng: np.random.Generator) -> np.ndarray:
    # equal mixture: uniform[-3,3], N(0,1), linear trend + noise, N(0, s^2) with s ~ U[0.1, 3]
    comp = rng.integers(0, 4, size=count)
    uniform = rng.uniform(-3.0, 3.0, size=(count, length))
    normal = rng.standard_normal((count, length))
    t = np.arange(length) - (length - 1) / 2.0
    slope = rng.uniform(-0.5, 0.5, size=(count, 1))
    intercept = rng.standard_normal((count, 1))
    trend = intercept + slope * t + rng.standard_normal((count, length))
    scale = rng.uniform(0.1, 3.0, size=(count, 1))
    scaled = scale * rng.standard_normal((count, length))
    return np.choose(comp[:, None], [uniform, normal, trend, scaled])


def generate_signal_array(count: int, length: int = SIGNAL_LENGTH, seed: int = 0):
    """Signals as a (count, length) array plus a label array per kind."""
    if count < 1:
        raise ContractError("count must be >= 1")
    if length < 2:
        raise ContractError("signal length must be >= 2")
    x = _draw(count, length, np.random.default_rng(seed))
    return x, {k: oracle_features(x, k) for k in ALL_KINDS}


def generate_signals(count: int, length: int = SIGNAL_LENGTH, seed: int = 0):
    """List of ``(signal, {kind: label})`` tuples; a pure function of its arguments."""
    x, labels = generate_signal_array(count, length, seed)
    return [(x[i], {k: float(labels[k][i]) for k in ALL_KINDS}) for i in range(count)]


@dataclass(frozen=True)
class FINConfig:
    n_signals: int = 100_000
    length: int = SIGNAL_LENGTH
    seed: int = 7
    val_fraction: float = 0.1
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    lr_patience: int = 5
    lr_factor: float = 0.5
    optimizer: OptimizerConfig = OptimizerConfig(lr=2e-3)
    r2_floor: float = 0.95


@dataclass
class FIN:
    """A feature imitating network, whole (6 layers) or cut down to an extractor (4 layers)."""

    kind: FeatureKind
    layers: list[Layer]
    metadata: dict = field(default_factory=dict)

    @property
    def is_cut(self) -> bool:
        return len(self.layers) == 4

    @property
    def input_length(self) -> int:
        return self.layers[0].in_features

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def forward(self, x: Tensor, upto: int | None = None) -> Tensor:
        return run_sequential(self.layers[:upto], x)

    def predict_scaled(self, signals: np.ndarray) -> np.ndarray:
        if self.is_cut:
            raise ContractError("cut FIN has no regression head")
        return self.forward(Tensor(signals)).data[..., 0]

    def predict(self, signals: np.ndarray) -> np.ndarray:
        """Imitated statistic in original units."""
        lo, hi = self.metadata["label_min"], self.metadata["label_max"]
        return lo + (hi - lo) * self.predict_scaled(signals)

    # frozen prefix: plain forward, never recorded
    def prefix(self, signals: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(signals), upto=N_FROZEN).data

    def finetune_layer(self) -> Layer:
        if not self.is_cut:
            raise ContractError("only a cut FIN exposes its finetune layer")
        return self.layers[3]

    def embed(self, signals) -> Tensor:
        x = signals if isinstance(signals, Tensor) else Tensor(signals)
        return self.forward(x)

    def named_layers(self):
        return [(f"fin_{self.kind.value}.l{i + 1}", layer) for i, layer in enumerate(self.layers)]


def build_fin(kind: FeatureKind | str, length: int, rng: np.random.Generator) -> FIN:
    layers, n_in = [], length
    for i, (width, act) in enumerate(zip(WIDTHS, ACTIVATIONS)):
        layers.append(dense(n_in, width, rng, act, name=f"fin_{FeatureKind(kind).value}.l{i + 1}"))
        n_in = width
    return FIN(FeatureKind(kind), layers)


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0


def train_fin(kind: FeatureKind | str, signals: np.ndarray, config: FINConfig = FINConfig(),
              labels: np.ndarray | None = None) -> FIN:
    """Regress a fresh FIN onto oracle labels of ``signals`` (count x L).

    The last ``val_fraction`` of rows is held out for early stopping and the
    reported R^2. Labels are min-max scaled to [0, 1] for the sigmoid head and
    the constants stored in ``metadata``.
    """
    kind = FeatureKind(kind)
    x = np.asarray(signals, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1000:
        raise ContractError(f"train_fin needs >= 1000 signals as a 2-D array, got shape {x.shape}")
    y = oracle_features(x, kind) if labels is None else np.asarray(labels, dtype=np.float64)
    n_val = max(1, int(round(len(x) * config.val_fraction)))
    x_tr, x_val = x[:-n_val], x[-n_val:]
    y_tr, y_val = y[:-n_val], y[-n_val:]
    lo, hi = float(y_tr.min()), float(y_tr.max())
    span = hi - lo if hi > lo else 1.0
    t_tr = (y_tr - lo) / span
    t_val = (y_val - lo) / span

    rng = np.random.default_rng(config.seed)
    fin = build_fin(kind, x.shape[1], rng)
    params = fin.parameters()
    opt = Optimizer(params, config.optimizer)
    best = (np.inf, copy.deepcopy(fin.layers), 0)
    stale = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_tr))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            with GradientTape() as tape:
                pred = fin.forward(Tensor(x_tr[idx]))
                loss = T.mse_loss(pred, t_tr[idx])
            if not np.isfinite(loss.item()):
                raise NonFiniteError(f"{kind.value} FIN: non-finite loss at epoch {epoch}")
            opt.step(backward(tape, loss, params))
        val_mse = float(np.mean((fin.predict_scaled(x_val) - t_val) ** 2))
        if val_mse < best[0]:
            best = (val_mse, copy.deepcopy(fin.layers), epoch)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
            if stale % config.lr_patience == 0:
                opt.scale_lr(config.lr_factor)
    fin.layers = best[1]
    fin.metadata = {"feature": kind.value, "seed": config.seed, "epochs": epoch, "best_epoch": best[2],
                    "val_mse": best[0], "label_min": lo, "label_max": hi, "n_train": len(x_tr),
                    "n_val": n_val, "length": x.shape[1]}
    fin.metadata["val_r2"] = r2_score(y_val, fin.predict(x_val))
    fin.metadata["r2_warning"] = fin.metadata["val_r2"] < config.r2_floor
    if fin.metadata["r2_warning"]:
        log.warning("%s FIN held-out R^2 %.4f below floor %.2f", kind.value, fin.metadata["val_r2"], config.r2_floor)
    return fin


def pretrain_fins(kinds=ALL_KINDS, config: FINConfig = FINConfig()) -> dict[FeatureKind, FIN]:
    x, labels = generate_signal_array(config.n_signals, config.length, config.seed)
    return {FeatureKind(k): train_fin(k, x, config, labels[FeatureKind(k)]) for k in kinds}


def surgery(fin: FIN) -> FIN:
    """Freeze layers 1-3, keep layer 4 trainable, drop layers 5-6. Returns a new FIN."""
    if fin.is_cut:
        raise ContractError("surgery on an already-cut FIN")
    if len(fin.layers) != len(WIDTHS):
        raise ContractError(f"surgery needs a full {len(WIDTHS)}-layer FIN, got {len(fin.layers)}")
    layers = copy.deepcopy(fin.layers[:4])
    for layer in layers[:N_FROZEN]:
        layer.freeze()
    layers[3].unfreeze()
    return FIN(fin.kind, layers, dict(fin.metadata, cut=True))


def embed_matrix(matrix, fins) -> Tensor:
    """Embed every stat column of an (L x s) matrix with each extractor.

    A leading batch axis is allowed. Output is (s, kinds, 8), or
    (batch, s, kinds, 8).
    """
    m = np.asarray(matrix.data if isinstance(matrix, Tensor) else matrix, dtype=np.float64)
    single = m.ndim == 2
    if single:
        m = m[None]
    length = fins[0].input_length
    if m.shape[1] != length:
        raise DimensionError(f"matrix has {m.shape[1]} rows, FIN input length is {length}")
    cols = np.swapaxes(m, 1, 2)  # (batch, s, L)
    per_kind = [T.reshape(f.embed(cols), cols.shape[:2] + (1, EMBED_DIM)) for f in fins]
    out = T.concat(per_kind, axis=2)
    return T.reshape(out, out.shape[1:]) if single else out


# ---------------------------------------------------------------- persistence

def _format_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def save_fin(fin: FIN, path) -> tuple[Path, Path]:
    """Write ``<path>`` (FINC1 container) and ``<path>.meta`` (key = value lines)."""
    path = Path(path)
    container.save(path, fin.named_layers())
    meta = dict(fin.metadata, kind=fin.kind.value)
    lines = [f"{k} = {_format_value(meta[k])}" for k in sorted(meta)]
    meta_path = path.with_name(path.name + ".meta")
    meta_path.write_text("\n".join(lines) + "\n")
    return path, meta_path


def _parse_value(raw: str):
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    if raw in ("True", "False"):
        return raw == "True"
    return raw


def load_fin(path) -> FIN:
    path = Path(path)
    layers = [layer for _, layer in container.load(path)]
    meta = {}
    meta_path = path.with_name(path.name + ".meta")
    for line in meta_path.read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = _parse_value(value.strip())
    return FIN(FeatureKind(meta.pop("kind")), layers, meta)
