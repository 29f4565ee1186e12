import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mambanet import evaluation as E
from mambanet.errors import ContractError
from mambanet.metrics import auc, auc_exact, permutation_null
from mambanet.model import ModelConfig


def pair_count_auc(scores, labels):
    """Exhaustive pair counting, exact rational arithmetic."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = Fraction(0)
    for p, n in itertools.product(pos, neg):
        wins += 1 if p > n else Fraction(1, 2) if p == n else 0
    return wins / (len(pos) * len(neg))


labelled = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]) | st.floats(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_auc_single_class():
    with pytest.raises(ContractError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_pair_counting_over_random_trials():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.integers(0, 5, n) / 4.0 if rng.random() < 0.5 else rng.random(n)
        assert auc_exact(scores, labels) == pair_count_auc(scores.tolist(), labels.tolist())
        assert auc(scores, labels) == float(pair_count_auc(scores.tolist(), labels.tolist()))


@given(labelled)
def test_auc_matches_pair_counting_property(case):
    scores, labels = case
    assume(0 < sum(labels) < len(labels))
    assert auc(scores, labels) == float(pair_count_auc(scores, labels))


@given(labelled)
def test_auc_label_complement(case):
    scores, labels = case
    assume(0 < sum(labels) < len(labels))
    flipped = [1 - y for y in labels]
    assert auc_exact(scores, labels) == 1 - auc_exact(scores, flipped)
    assert abs(auc(scores, labels) - (1 - auc(scores, flipped))) <= 2 ** -53


@given(labelled)
def test_auc_monotone_transform_invariant(case):
    scores, labels = case
    assume(0 < sum(labels) < len(labels))
    s = np.clip(np.asarray(scores), 1e-6, 1 - 1e-6)
    base = auc(s, labels)
    assert auc(s ** 3, labels) == base
    assert auc(np.log(s / (1 - s)), labels) == base


def test_permutation_null_is_seeded():
    rng = np.random.default_rng(1)
    s, y = rng.random(40), rng.integers(0, 2, 40)
    a = permutation_null(s, y, 200, seed=3)
    assert a.tobytes() == permutation_null(s, y, 200, seed=3).tobytes()
    assert 0.35 < np.median(a) < 0.65


# ---------------------------------------------------------------- splits


def test_splits_have_no_overlap_and_are_ordered(synth_samples):
    splits = E.make_splits({"synth": synth_samples})
    assert len(splits) == 1
    (split,) = splits
    assert {s.phase for s in split.train} == {"season"}
    assert {s.phase for s in split.test} == {"playoff"}
    assert not {s.game_id for s in split.train} & {s.game_id for s in split.test}
    assert max(s.date for s in split.train) < min(s.date for s in split.test)
    assert len(split.train) + len(split.test) == len(synth_samples)


def test_split_rejects_shared_sample(synth_samples):
    with pytest.raises(ContractError):
        E.Split("x", synth_samples[:5], synth_samples[4:8])


def test_season_without_playoffs_is_skipped(synth_samples, caplog):
    season_only = [s for s in synth_samples if s.phase == "season"]
    assert E.make_splits({"synth": season_only}) == []
    assert "no playoff games" in caplog.text


def test_cross_split(synth_samples):
    splits = E.make_splits({"a": synth_samples, "b": synth_samples[-5:]}, cross=[("a", "b")], within=False)
    assert [s.name for s in splits] == ["a:2020-21->b"]
    assert len(splits[0].test) == 5


# ---------------------------------------------------------------- reports


def fake_reports():
    return [E.EvalReport("synth:2020-21", f"mamba-row{r}", 0.5 + r / 10 + 1 / 3000, 100, 20, 7, n_params=10 * r,
                         descriptor=E.descriptor(ModelConfig(variant=f"mamba-row{r}"))) for r in range(1, 5)]


def test_report_csv_round_trip(tmp_path):
    reports = fake_reports()
    E.emit_report(reports, tmp_path)
    rows = E.read_report_csv(tmp_path / "report.csv")
    assert [r["variant"] for r in rows] == [r.variant for r in reports]
    assert [r["auc"] for r in rows] == [r.auc for r in reports]
    assert list(rows[0]) == E.CSV_COLUMNS
    assert all(r["wall_s"] is None for r in rows)


def test_report_table_layout():
    table = E.report_table(fake_reports())
    lines = table.splitlines()
    assert len(lines) == 2 + 4
    assert [c.strip() for c in lines[0].split(" | ")][:5] == ["R", "FS", "FC", "IF", "Layers"]
    assert "0.60" in lines[2] and "0.90" in lines[5]
    assert "Dense Conv RNN" in lines[5]


def test_emit_report_needs_reports(tmp_path):
    with pytest.raises(ContractError):
        E.emit_report([], tmp_path)


def test_descriptor_rows():
    d = [E.descriptor(ModelConfig(variant=f"mamba-row{r}")) for r in range(1, 5)]
    assert [x["IF"] for x in d] == ["m", "m std v s", "m std v s", "m std v s"]
    assert [x["FS"] for x in d] == ["T", "T", "T P", "T P"]


# ---------------------------------------------------------------- runners


@pytest.fixture(scope="module")
def ablation(synth_samples, random_fins):
    from mambanet.ingest import dumps_dataset

    before = dumps_dataset(synth_samples)
    base = ModelConfig(team_dense=(8, 4), player_compress=4, conv_filters=4, team_lstm=4, player_lstm=4,
                       fusion=4, max_epochs=2)
    splits = E.make_splits({"synth": synth_samples})
    reports = E.run_ablation(splits, random_fins, seed=5, base=base, n_shuffles=50)
    return reports, splits, before, dumps_dataset(synth_samples)


def test_ablation_reports(ablation):
    reports, splits, _, _ = ablation
    assert [r.variant for r in reports] == list(E.ABLATION_ROWS)
    assert all(r.n_train == len(splits[0].train) and r.n_test == len(splits[0].test) for r in reports)
    assert all(0 <= r.auc <= 1 and r.seed == 5 for r in reports)
    counts = [r.n_params for r in reports]
    assert counts == sorted(set(counts))
    assert all(len(r.predictions) == r.n_test for r in reports)


def test_evaluation_does_not_mutate_inputs(ablation, random_fins):
    _, _, before, after = ablation
    assert before == after
    assert all(not layer.frozen for f in random_fins.values() for layer in f.layers)
