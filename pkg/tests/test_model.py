import dataclasses

import numpy as np
import pytest

from mambanet import model as M
from mambanet.errors import ContractError, DimensionError
from mambanet.ingest import MambaDataset, assemble_mamba, normalize_apply, normalize_fit
from mambanet.metrics import auc
from mambanet.numerics import tensor as T

from .gradcheck import finite_difference_error

SMALL = dict(team_dense=(8, 4), findff_dense=(8, 4), player_compress=4, conv_filters=4, team_lstm=4,
             player_lstm=4, fusion=4, max_epochs=3, batch_size=16)


def planted_dataset(n, seed, n_team=35, n_player=34, n_players=10, window=10):
    """Labels are the sign of the home-minus-away window mean of the first two stats."""
    rng = np.random.default_rng(seed)
    teams = rng.normal(size=(n, 2, window, n_team))
    players = rng.normal(size=(n, 2, n_players, window, n_player))
    margin = teams[:, 0, :, :2].mean(axis=(1, 2)) - teams[:, 1, :, :2].mean(axis=(1, 2))
    labels = (margin > 0).astype(int)
    return MambaDataset(teams, players, np.ones((n, 2, n_players), bool), labels)


@pytest.fixture(scope="module")
def normalized(synth_samples):
    norms = normalize_fit(synth_samples)
    return [normalize_apply(s, norms) for s in synth_samples], norms


# ---------------------------------------------------------------- structure


def test_findff_input_width(random_fins):
    net = M.build_findff(random_fins, M.ModelConfig(variant="findff", stats=33))
    assert net.layers["findff.d0"].in_features == 2 * 33 * 8 == 528
    net6 = M.build_findff(random_fins, M.ModelConfig(variant="findff", stats=6))
    assert net6.layers["findff.d0"].in_features == 96


def test_findff_needs_mean_fin(random_fins):
    with pytest.raises(ContractError):
        M.build_findff({k: v for k, v in random_fins.items() if k.value != "mean"}, M.ModelConfig(variant="findff"))


def test_mamba_rows_parameter_counts_increase(random_fins):
    counts = [M.build_mamba(random_fins, M.ModelConfig(variant=f"mamba-row{r}")).n_params() for r in range(1, 5)]
    assert counts == sorted(set(counts))


def test_row1_is_dense_only(random_fins):
    net = M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row1"))
    kinds = {layer.kind for layer in net.layers.values()}
    assert kinds == {"dense"}
    assert net.config.kinds == ("mean",)
    with pytest.raises(ContractError):
        M.ModelConfig(variant="mamba-row1", kinds=("mean", "std"))


def test_row4_has_conv_and_lstm(random_fins):
    net = M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row4"))
    assert {layer.kind for layer in net.layers.values()} == {"dense", "conv1d", "lstm"}


def test_unknown_variant():
    with pytest.raises(ContractError):
        M.ModelConfig(variant="mamba-row5")


def test_build_mamba_missing_fin(random_fins):
    with pytest.raises(ContractError):
        M.build_mamba({k: v for k, v in random_fins.items() if k.value != "skewness"},
                      M.ModelConfig(variant="mamba-row2"))


def test_row3_requires_player_matrices(random_fins):
    cfg = M.ModelConfig(variant="mamba-row3", **SMALL)
    net = M.build_mamba(random_fins, cfg)
    ds = planted_dataset(4, 0)
    no_players = MambaDataset(ds.teams, ds.players[:, :, :, :, :0], ds.masks, ds.labels)
    with pytest.raises(DimensionError):
        net.predict_dataset(no_players)


# ---------------------------------------------------------------- prediction


@pytest.mark.parametrize("variant", M.VARIANTS)
def test_predictions_in_unit_interval_and_pure(variant, random_fins, normalized):
    samples, _ = normalized
    net = M.build_model(M.ModelConfig(variant=variant, **SMALL), random_fins)
    p = M.predict(net, samples[3])
    assert 0 < p < 1
    assert M.predict(net, samples[3]) == p


@pytest.mark.parametrize("variant", ["findff", "mamba-row4"])
def test_batch_equals_loop(variant, random_fins, normalized):
    samples, _ = normalized
    net = M.build_model(M.ModelConfig(variant=variant, **SMALL), random_fins)
    batch = M.predict_batch(net, samples[:20])
    loop = np.array([M.predict(net, s) for s in samples[:20]])
    assert np.max(np.abs(batch - loop)) <= 1e-12


# ---------------------------------------------------------------- training


def test_training_fits_planted_signal(random_fins):
    ds = planted_dataset(50, seed=1)
    cfg = M.ModelConfig(variant="mamba-row1", seed=0, max_epochs=60, batch_size=10, val_fraction=0.0,
                        team_dense=(32, 16), fusion=16)
    net = M.train(M.build_mamba(random_fins, cfg), ds)
    assert auc(net.predict_dataset(ds), ds.labels) >= 0.95


def test_training_keeps_frozen_prefix(random_fins):
    ds = planted_dataset(40, seed=2)
    net = M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row4", **SMALL))
    frozen = net.frozen_snapshot()
    layer4 = net.fins["mean"].finetune_layer().params["weight"].data.copy()
    M.train(net, ds)
    assert net.frozen_snapshot() == frozen
    assert len(frozen) == 4 * 3 * 2
    assert not np.array_equal(layer4, net.fins["mean"].finetune_layer().params["weight"].data)
    assert random_fins[next(iter(random_fins))].layers[3].params["weight"].trainable


def test_training_is_deterministic(random_fins):
    ds = planted_dataset(40, seed=3)
    cfg = M.ModelConfig(variant="mamba-row3", **SMALL)
    a = M.train(M.build_mamba(random_fins, cfg), ds)
    b = M.train(M.build_mamba(random_fins, cfg), ds)
    assert a.history == b.history
    assert all(p.data.tobytes() == q.data.tobytes() for p, q in zip(a.parameters(), b.parameters()))


def test_training_rejects_single_class(random_fins):
    ds = planted_dataset(20, seed=4)
    ds = MambaDataset(ds.teams, ds.players, ds.masks, np.ones(20, int))
    with pytest.raises(ContractError):
        M.train(M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row1", **SMALL)), ds)
    with pytest.raises(ContractError):
        M.train(M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row1", **SMALL)), ds.subset(slice(0, 0)))


# ---------------------------------------------------------------- gradients


def miniature(random_fins, variant="mamba-row4"):
    cfg = M.ModelConfig(variant=variant, kinds=("mean",) if variant == "mamba-row1" else ("mean", "skewness"),
                        team_dense=(4, 2), player_compress=2, conv_filters=2, conv_kernel=2, team_lstm=2,
                        player_lstm=2, fusion=2)
    net = M.build_mamba(random_fins, cfg, n_team_stats=2, n_player_stats=2, n_players=2)
    ds = planted_dataset(6, seed=5, n_team=2, n_player=2, n_players=2)
    return net, ds


@pytest.mark.parametrize("variant", ["mamba-row1", "mamba-row4"])
def test_end_to_end_gradient(random_fins, variant):
    net, ds = miniature(random_fins, variant)
    rng = np.random.default_rng(0)
    for p in net.trainable_parameters():
        p.data[...] += rng.normal(scale=0.3, size=p.shape)
    prepared = net.prepare(ds)

    def loss_fn():
        return T.bce_loss(net.forward(prepared), ds.labels)

    assert finite_difference_error(loss_fn, net.trainable_parameters()) < 1e-3


# ---------------------------------------------------------------- persistence


def test_save_load_round_trip(random_fins, normalized, tmp_path):
    samples, norms = normalized
    ds = assemble_mamba(samples[:30])
    net = M.train(M.build_mamba(random_fins, M.ModelConfig(variant="mamba-row4", **SMALL)), ds, norms=norms)
    M.save_model(net, tmp_path / "m", ds)
    back = M.load_model(tmp_path / "m")
    assert back.config == net.config
    assert back.norms == norms
    assert back.predict_dataset(ds).tobytes() == net.predict_dataset(ds).tobytes()
    M.save_model(back, tmp_path / "again", ds)
    for name in ("weights.finc", "manifest.json"):
        assert (tmp_path / "again" / name).read_bytes() == (tmp_path / "m" / name).read_bytes()


def test_config_dict_round_trip():
    cfg = M.ModelConfig(variant="findff", stats=("drb", "ast"), seed=4)
    assert M.ModelConfig.from_dict(cfg.to_dict()) == cfg
    assert dataclasses.replace(cfg, seed=5) != cfg
