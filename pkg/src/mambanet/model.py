"""FINDFF, MambaNet (four ablation rows) and a logistic-regression reference.

Inputs are normalized :class:`~mambanet.ingest.MambaDataset` objects. FIN
layers 1-3 are frozen, so their outputs are computed once per dataset by
:meth:`Network.prepare`; only the finetuned fourth layer and everything
downstream is differentiated during training.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fin as finlib
from .errors import ContractError, DimensionError, NonFiniteError
from .fin import FIN, FeatureKind
from .ingest import MambaDataset, NormConstants, resolve_stats
from .metrics import auc
from .numerics import container
from .numerics import layers as L
from .numerics import tensor as T
from .numerics.optim import Optimizer, OptimizerConfig
from .numerics.tensor import GradientTape, Tensor, backward

log = logging.getLogger(__name__)

VARIANTS = ("logistic", "findff", "mamba-row1", "mamba-row2", "mamba-row3", "mamba-row4")
ALL_KIND_NAMES = tuple(k.value for k in FeatureKind)


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "mamba-row4"
    seed: int = 0
    kinds: tuple = ()              # empty: variant default
    stats: object = 33             # findff / logistic stat subset (count, names or indices)
    window: int = 10
    team_dense: tuple = (256, 64)
    findff_dense: tuple = (128, 64)
    player_compress: int = 32
    conv_filters: int = 32
    conv_kernel: int = 3
    team_lstm: int = 64
    player_lstm: int = 32
    fusion: int = 64
    optimizer: OptimizerConfig = OptimizerConfig()
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 10
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.seed is None:
            raise ContractError("seed is mandatory")
        if not self.kinds:
            default = ("mean",) if self.variant in ("findff", "mamba-row1") else ALL_KIND_NAMES
            object.__setattr__(self, "kinds", () if self.variant == "logistic" else default)
        object.__setattr__(self, "kinds", tuple(FeatureKind(k).value for k in self.kinds))
        if self.variant == "mamba-row1" and self.kinds != ("mean",):
            raise ContractError("mamba-row1 uses the mean FIN only")
        if self.variant in ("findff",) and self.kinds != ("mean",):
            raise ContractError("findff uses the mean FIN only")

    @property
    def use_players(self) -> bool:
        return self.variant in ("mamba-row3", "mamba-row4")

    @property
    def use_rnn(self) -> bool:
        return self.variant == "mamba-row4"

    @property
    def is_mamba(self) -> bool:
        return self.variant.startswith("mamba")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = asdict(self.optimizer)
        d["stats"] = list(self.stats) if isinstance(self.stats, (list, tuple)) else self.stats
        d["kinds"] = list(self.kinds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["optimizer"] = OptimizerConfig(**d["optimizer"])
        for k in ("kinds", "team_dense", "findff_dense"):
            d[k] = tuple(d[k])
        if isinstance(d["stats"], list):
            d["stats"] = tuple(d["stats"])
        return cls(**d)


@dataclass
class Network:
    """Untrained or trained model. ``layers`` holds everything except the FIN extractors."""

    config: ModelConfig
    fins: dict[str, FIN]
    layers: dict[str, L.Layer]
    n_team_stats: int = 35
    n_player_stats: int = 34
    n_players: int = 10
    norms: NormConstants | None = None
    history: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    # ------------------------------------------------------------ structure
    @property
    def stat_idx(self) -> list[int]:
        if self.config.is_mamba:
            return list(range(self.n_team_stats))
        return resolve_stats(self.config.stats)

    def named_layers(self) -> list[tuple[str, L.Layer]]:
        out = []
        for kind in self.config.kinds:
            out.extend(self.fins[kind].named_layers())
        out.extend(sorted(self.layers.items()))
        return out

    def parameters(self) -> list:
        return [p for _, layer in self.named_layers() for p in layer.parameters()]

    def trainable_parameters(self) -> list:
        return [p for p in self.parameters() if p.trainable]

    def n_params(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def frozen_snapshot(self) -> dict[str, bytes]:
        return {p.name: p.data.tobytes() for p in self.parameters() if not p.trainable}

    # ------------------------------------------------------------ inputs
    def prepare(self, ds: MambaDataset) -> dict:
        """Precompute frozen FIN-prefix outputs; a pure function of the dataset."""
        cfg = self.config
        if ds.teams.shape[-1] != self.n_team_stats or ds.teams.shape[-2] != cfg.window:
            raise DimensionError(f"team matrices {ds.teams.shape[-2:]} != ({cfg.window}, {self.n_team_stats})")
        out = {"labels": ds.labels}
        if cfg.variant == "logistic":
            out["means"] = ds.teams[:, :, :, self.stat_idx].mean(axis=2).reshape(len(ds), -1)
            return out
        cols = np.swapaxes(ds.teams[:, :, :, self.stat_idx], 2, 3)  # (N, 2, S, n)
        out["team_prefix"] = np.stack([self.fins[k].prefix(cols) for k in cfg.kinds], axis=3)
        if cfg.use_players:
            if ds.players.shape[-1] != self.n_player_stats or ds.players.shape[2] != self.n_players:
                raise DimensionError(f"player matrices {ds.players.shape[2:]} do not match the model")
            pcols = np.swapaxes(ds.players, 3, 4)  # (N, 2, P, S, n)
            out["player_prefix"] = np.stack([self.fins[k].prefix(pcols) for k in cfg.kinds], axis=4)
        if cfg.use_rnn:
            out["teams"] = ds.teams
            out["players"] = ds.players
        return out

    # ------------------------------------------------------------ forward
    def _fin_head(self, prefix: np.ndarray, kind_axis: int) -> Tensor:
        """Finetuned FIN layer 4 applied per kind, concatenated along the kind axis."""
        parts = []
        for j, kind in enumerate(self.config.kinds):
            x = Tensor._wrap(np.take(prefix, j, axis=kind_axis))
            y = L.dense_forward(x, self.fins[kind].finetune_layer())
            parts.append(T.reshape(y, y.shape[:kind_axis] + (1, finlib.EMBED_DIM)))
        return T.concat(parts, axis=kind_axis) if len(parts) > 1 else parts[0]

    def forward(self, batch: dict) -> Tensor:
        cfg = self.config
        if cfg.variant == "logistic":
            return T.reshape(L.dense_forward(Tensor._wrap(batch["means"]), self.layers["head"]), (-1,))
        team = self._fin_head(batch["team_prefix"], 3)  # (B, 2, S, k, 8)
        b = team.shape[0]
        if cfg.variant == "findff":
            x = T.reshape(team, (b, -1))
            x = L.run_sequential([self.layers[f"findff.d{i}"] for i in range(len(cfg.findff_dense))], x)
            return T.reshape(L.dense_forward(x, self.layers["head"]), (-1,))
        team_flat = T.reshape(team, (b, 2, -1))
        sides = []
        for s, side in enumerate(("home", "away")):
            parts = [L.run_sequential([self.layers[f"{side}.team.d{i}"] for i in range(len(cfg.team_dense))],
                                      team_flat[:, s, :])]
            sides.append(parts)
        if cfg.use_players:
            pl = self._fin_head(batch["player_prefix"], 4)  # (B, 2, P, S, k, 8)
            pl = T.reshape(pl, (b, 2, self.n_players, -1))
            pl = L.dense_forward(pl, self.layers["player.compress"])  # (B, 2, P, c)
            for s, side in enumerate(("home", "away")):
                seq = T.transpose(pl[:, s], (0, 2, 1))  # (B, c, P)
                conv = L.conv1d_forward(seq, self.layers[f"{side}.player.conv"])
                sides[s].append(T.mean(conv, axis=2))
        if cfg.use_rnn:
            teams = Tensor._wrap(batch["teams"].reshape((-1,) + batch["teams"].shape[2:]))
            th = T.reshape(L.lstm_forward(teams, self.layers["team.lstm"]), (b, 2, -1))
            players = batch["players"]
            pseq = Tensor._wrap(players.reshape((-1,) + players.shape[3:]))
            ph = T.reshape(L.lstm_forward(pseq, self.layers["player.lstm"]), (b, 2, self.n_players, -1))
            ph = T.mean(ph, axis=2)
            for s in range(2):
                sides[s].extend([th[:, s], ph[:, s]])
        fused = T.concat([v for parts in sides for v in parts], axis=-1)
        fused = L.dense_forward(fused, self.layers["fusion"])
        return T.reshape(L.dense_forward(fused, self.layers["head"]), (-1,))

    def predict_prepared(self, prepared: dict, idx=None) -> np.ndarray:
        batch = prepared if idx is None else _subset(prepared, idx)
        return self.forward(batch).data.copy()

    def predict_dataset(self, ds: MambaDataset) -> np.ndarray:
        """Home-win probabilities for every sample of an already-normalized dataset."""
        return self.predict_prepared(self.prepare(ds))


def _subset(prepared: dict, idx) -> dict:
    return {k: v[idx] for k, v in prepared.items()}


def _check_fins(fins: dict, kinds) -> dict[str, FIN]:
    out = {}
    for k in kinds:
        f = fins.get(k) if k in fins else fins.get(FeatureKind(k))
        if f is None:
            raise ContractError(f"no pretrained {k} FIN supplied")
        f = copy.deepcopy(f)
        out[k] = f if f.is_cut else finlib.surgery(f)
    return out


def build_findff(fins: dict, config: ModelConfig, n_team_stats: int = 35) -> Network:
    if config.variant != "findff":
        config = replace(config, variant="findff", kinds=("mean",))
    rng = np.random.default_rng(config.seed)
    net = Network(config, _check_fins(fins, config.kinds), {}, n_team_stats=n_team_stats)
    width = 2 * len(net.stat_idx) * finlib.EMBED_DIM
    for i, w in enumerate(config.findff_dense):
        net.layers[f"findff.d{i}"] = L.dense(width, w, rng, "relu", f"findff.d{i}")
        width = w
    net.layers["head"] = L.dense(width, 1, rng, "sigmoid", "head")
    return net


def build_logistic(config: ModelConfig, n_team_stats: int = 35) -> Network:
    if config.variant != "logistic":
        config = replace(config, variant="logistic", kinds=())
    rng = np.random.default_rng(config.seed)
    net = Network(config, {}, {}, n_team_stats=n_team_stats)
    net.layers["head"] = L.dense(2 * len(net.stat_idx), 1, rng, "sigmoid", "head")
    return net


def build_mamba(fins: dict, config: ModelConfig, n_team_stats: int = 35, n_player_stats: int = 34,
                n_players: int = 10) -> Network:
    if not config.is_mamba:
        raise ContractError(f"build_mamba needs a mamba-row variant, got {config.variant!r}")
    rng = np.random.default_rng(config.seed)
    net = Network(config, _check_fins(fins, config.kinds), {}, n_team_stats, n_player_stats, n_players)
    k = len(config.kinds)
    side_width = 0
    for side in ("home", "away"):
        width = n_team_stats * k * finlib.EMBED_DIM
        for i, w in enumerate(config.team_dense):
            net.layers[f"{side}.team.d{i}"] = L.dense(width, w, rng, "relu", f"{side}.team.d{i}")
            width = w
    side_width += config.team_dense[-1]
    if config.use_players:
        if n_players < config.conv_kernel:
            raise ContractError(f"{n_players} players is fewer than conv kernel {config.conv_kernel}")
        net.layers["player.compress"] = L.dense(n_player_stats * k * finlib.EMBED_DIM, config.player_compress,
                                                rng, "relu", "player.compress")
        for side in ("home", "away"):
            net.layers[f"{side}.player.conv"] = L.conv1d(config.player_compress, config.conv_filters,
                                                         config.conv_kernel, rng, "relu", f"{side}.player.conv")
        side_width += config.conv_filters
    if config.use_rnn:
        net.layers["team.lstm"] = L.lstm(n_team_stats, config.team_lstm, rng, "team.lstm")
        net.layers["player.lstm"] = L.lstm(n_player_stats, config.player_lstm, rng, "player.lstm")
        side_width += config.team_lstm + config.player_lstm
    net.layers["fusion"] = L.dense(2 * side_width, config.fusion, rng, "relu", "fusion")
    net.layers["head"] = L.dense(config.fusion, 1, rng, "sigmoid", "head")
    return net


def build_model(config: ModelConfig, fins: dict | None = None, **dims) -> Network:
    if config.variant == "logistic":
        return build_logistic(config, dims.get("n_team_stats", 35))
    if config.variant == "findff":
        return build_findff(fins or {}, config, dims.get("n_team_stats", 35))
    return build_mamba(fins or {}, config, **dims)


# ---------------------------------------------------------------- training

def _score(labels: np.ndarray, probs: np.ndarray) -> float:
    """Validation criterion: AUC, or negative BCE when only one class is present."""
    if labels.min() != labels.max():
        return auc(probs, labels)
    p = np.clip(probs, 1e-7, 1 - 1e-7)
    return float(np.mean(labels * np.log(p) + (1 - labels) * np.log(1 - p)))


def train(model: Network, dataset: MambaDataset, config: ModelConfig | None = None,
          norms: NormConstants | None = None) -> Network:
    """Fit ``model`` on a chronologically ordered, normalized dataset.

    The last ``val_fraction`` of samples is the validation block (with
    ``val_fraction=0`` or fewer than 10 samples the training set is scored
    instead); training stops after ``patience`` epochs without a better validation AUC and the
    best epoch's weights are restored. ``model.history`` holds the per-epoch
    validation scores.
    """
    cfg = config or model.config
    n = len(dataset)
    if n == 0:
        raise ContractError("training dataset is empty")
    labels = np.asarray(dataset.labels)
    if labels.min() == labels.max():
        raise ContractError("training labels contain a single class")
    n_val = max(1, int(round(n * cfg.val_fraction))) if n >= 10 and cfg.val_fraction > 0 else 0
    tr_idx = np.arange(n - n_val)
    prepared = model.prepare(dataset)
    params = model.trainable_parameters()
    opt = Optimizer(params, cfg.optimizer)
    rng = np.random.default_rng(cfg.seed)
    eval_idx = np.arange(n - n_val, n) if n_val else tr_idx
    best_score, best_state, stale = -np.inf, None, 0
    model.history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(tr_idx)
        for start in range(0, len(order), cfg.batch_size):
            idx = np.sort(order[start:start + cfg.batch_size])
            batch = _subset(prepared, idx)
            with GradientTape() as tape:
                loss = T.bce_loss(model.forward(batch), batch["labels"])
            if not np.isfinite(loss.item()):
                raise NonFiniteError(f"non-finite training loss at epoch {epoch}")
            opt.step(backward(tape, loss, params))
        score = _score(labels[eval_idx], model.predict_prepared(prepared, eval_idx))
        model.history.append(score)
        if score > best_score:
            best_score, stale = score, 0
            best_state = [p.data.copy() for p in params]
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    for p, data in zip(params, best_state):
        p.data[...] = data
    model.norms = norms if norms is not None else model.norms
    model.metadata.update(best_val=best_score, epochs=len(model.history), n_train=int(len(tr_idx)),
                          n_val=int(n_val))
    return model


def predict(model: Network, sample) -> float:
    """Home-win probability of one normalized :class:`MatchupSample`."""
    from .ingest import assemble_mamba
    ds = assemble_mamba([sample], n=model.config.window, n_players=model.n_players)
    return float(model.predict_dataset(ds)[0])


def predict_batch(model: Network, samples) -> np.ndarray:
    from .ingest import assemble_mamba
    return model.predict_dataset(assemble_mamba(samples, n=model.config.window, n_players=model.n_players))


# ---------------------------------------------------------------- persistence

def dataset_fingerprint(ds: MambaDataset) -> str:
    h = hashlib.sha256()
    for arr in (ds.teams, ds.players, ds.masks.astype(np.uint8), ds.labels.astype(np.int64)):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def save_model(model: Network, directory, dataset: MambaDataset | None = None) -> Path:
    """``weights.finc`` (FINC1 container) plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    container.save(d / "weights.finc", model.named_layers())
    manifest = {
        "config": model.config.to_dict(),
        "dims": {"n_team_stats": model.n_team_stats, "n_player_stats": model.n_player_stats,
                 "n_players": model.n_players},
        "norms": model.norms.to_dict() if model.norms else None,
        "fins": {k: {mk: mv for mk, mv in f.metadata.items()} for k, f in sorted(model.fins.items())},
        "history": model.history,
        "metadata": model.metadata,
        "dataset_fingerprint": dataset_fingerprint(dataset) if dataset is not None else None,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return d


def load_model(directory) -> Network:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    cfg = ModelConfig.from_dict(manifest["config"])
    named = dict(container.load(d / "weights.finc"))
    fins = {}
    for kind in cfg.kinds:
        layers = [named.pop(f"fin_{kind}.l{i}") for i in range(1, 5)]
        fins[kind] = FIN(FeatureKind(kind), layers, manifest["fins"][kind])
    net = Network(cfg, fins, named, **manifest["dims"])
    net.norms = NormConstants.from_dict(manifest["norms"]) if manifest["norms"] else None
    net.history = manifest["history"]
    net.metadata = manifest["metadata"]
    return net
