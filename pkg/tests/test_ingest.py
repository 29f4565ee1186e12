import csv
import dataclasses
import datetime as dt
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mambanet import ingest as I
from mambanet.errors import ContractError, DegenerateInputError, ParseError
from mambanet.synth import write_league

from .conftest import make_game, make_player


# ---------------------------------------------------------------- Elo and winning percentage


def test_elo_expected_examples():
    assert I.elo_expected(1500, 1500) == 0.5
    assert I.elo_expected(1900, 1500) == pytest.approx(10 / 11, abs=1e-15)


@given(st.floats(0, 4000), st.floats(0, 4000))
def test_elo_expected_complement(a, b):
    assert I.elo_expected(a, b) + I.elo_expected(b, a) == 1.0


def test_elo_update_equal_ratings():
    h, a = I.TeamState("H"), I.TeamState("A")
    I.elo_update(h, a, True, 20)
    assert (h.elo, a.elo) == (1510.0, 1490.0)


def test_elo_update_expected_winner_barely_moves():
    h, a = I.TeamState("H", elo=3500), I.TeamState("A", elo=1000)
    I.elo_update(h, a, True, 20)
    assert abs(h.elo - 3500) < 1e-4


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.booleans(), st.floats(1, 64)),
                min_size=1, max_size=200))
def test_elo_update_zero_sum(updates):
    teams = [I.TeamState(str(i)) for i in range(6)]
    total = sum(t.elo for t in teams)
    for i, j, won, k in updates:
        if i == j:
            continue
        before = teams[i].elo + teams[j].elo
        I.elo_update(teams[i], teams[j], won, k)
        assert teams[i].elo + teams[j].elo == before
    assert sum(t.elo for t in teams) == total


def test_elo_rejects_nonpositive_k():
    with pytest.raises(ContractError):
        I.elo_update(I.TeamState("H"), I.TeamState("A"), True, 0)


def test_winning_pct():
    assert I.winning_pct(I.TeamState("T")) == 0.5
    assert I.winning_pct(I.TeamState("T", wins=3, losses=1)) == 0.75


@given(st.integers(0, 100), st.integers(0, 100), st.integers(1, 5))
def test_winning_pct_monotone_in_wins(wins, losses, extra):
    lo = I.winning_pct(I.TeamState("T", wins=wins, losses=losses))
    assert I.winning_pct(I.TeamState("T", wins=wins + extra, losses=losses)) >= lo


def test_league_replay_derived_columns():
    day = dt.date(2021, 1, 1)
    games = [make_game(f"G{i}", (day + dt.timedelta(days=i)).isoformat(), "A", "B", 100, 90 if i < 2 else 110)
             for i in range(3)]
    league = I.League(games)
    w = league.window_team("A", "2021-02-01", n=3)
    assert w.values[:, -2].tolist() == [1.0, 1.0, 2 / 3]
    assert w.values[0, -1] == 1510.0
    assert league.states["A"].elo + league.states["B"].elo == 3000.0


def test_winning_pct_resets_each_season():
    games = [make_game("G1", "2020-03-01", "A", "B", season="2019-20"),
             make_game("G2", "2020-11-01", "B", "A", season="2020-21")]
    w = I.League(games).window_team("A", "2021-01-01", n=2)
    assert w.values[:, -2].tolist() == [1.0, 0.0]


# ---------------------------------------------------------------- windows


def series(n_games, team="A"):
    day = dt.date(2021, 1, 1)
    return [make_game(f"G{i:03d}", (day + dt.timedelta(days=i)).isoformat(), team, "Z", fill=float(i))
            for i in range(1, n_games + 1)]


def test_window_last_n_games():
    league = I.League(series(82))
    w = league.window_team("A", "2022-01-01", 10)
    assert w.values[:, 0].tolist() == list(map(float, range(73, 83)))
    assert w.n_real == 10


def test_window_left_pads_with_earliest_row():
    league = I.League(series(6))
    w = league.window_team("A", "2022-01-01", 10)
    assert w.n_real == 6
    assert w.values[:, 0].tolist() == [1.0] * 4 + [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert len(set(w.game_ids[:5])) == 1


def test_window_excludes_same_day():
    league = I.League(series(5))
    assert league.window_team("A", "2021-01-04", 10).values[-1, 0] == 2.0


def test_window_without_prior_games_is_degenerate():
    with pytest.raises(DegenerateInputError):
        I.League(series(3)).window_team("A", "2021-01-01", 10)


@given(st.integers(1, 30), st.integers(1, 12))
@settings(max_examples=30)
def test_padding_keeps_real_count(k, n):
    w = I.League(series(k)).window_team("A", "2030-01-01", n)
    assert w.values.shape[0] == n
    assert w.n_real == min(k, n)
    assert len(set(w.game_ids)) == min(k, n)


def test_no_leakage_over_fixture(synth_league, synth_samples):
    dates = {g.game_id: g.date for g in synth_league.games}
    bad = 0
    for s in synth_samples:
        for key in ("home", "away"):
            bad += sum(dates[g] >= s.date for g in s.sources[key])
        for key in ("home_players", "away_players"):
            bad += sum(dates[g] >= s.date for ids in s.sources[key] for g in ids)
    assert bad == 0


# ---------------------------------------------------------------- top players


def roster_league(minutes: dict):
    games = [make_game("G1", "2021-01-01", "A", "B")]
    players = [make_player("G1", pid, "A", mp) for pid, mp in minutes.items()]
    return games, players


def test_top_players_by_minutes():
    mins = {str(100 + i): float(i) for i in range(12)}
    league = I.League(*roster_league(mins))
    chosen = league.select_top_players("A", "2021-02-01", 10)
    assert chosen == [str(100 + i) for i in range(11, 1, -1)]


def test_top_players_tie_prefers_lower_id():
    league = I.League(*roster_league({"9": 30.0, "10": 30.0, "2": 10.0}))
    assert league.select_top_players("A", "2021-02-01", 10)[:3] == ["9", "10", "2"]


def test_top_players_pads_short_roster():
    league = I.League(*roster_league({"1": 30.0, "2": 20.0}))
    assert league.select_top_players("A", "2021-02-01", 10) == ["1", "2"] + [None] * 8


def test_top_players_permutation_invariant(synth_league):
    base = I.League(synth_league.games, synth_league.players)
    games, players = list(synth_league.games), list(synth_league.players)
    rnd = random.Random(5)
    rnd.shuffle(games)
    rnd.shuffle(players)
    shuffled = I.League(games, players)
    for g in synth_league.games[20::7]:
        for team in (g.home_team, g.away_team):
            assert shuffled.select_top_players(team, g.date) == base.select_top_players(team, g.date)


# ---------------------------------------------------------------- normalization


def test_normalize_fit_moments(synth_samples):
    norms = I.normalize_fit(synth_samples)
    z = [I.normalize_apply(s, norms) for s in synth_samples]
    rows = np.concatenate([np.concatenate([s.home, s.away]) for s in z])
    live = np.array(norms.team_scale) > 0
    assert np.abs(rows[:, live].mean(axis=0)).max() <= 1e-9
    assert np.abs(rows[:, live].var(axis=0) - 1).max() <= 1e-9
    assert not rows[:, ~live].any()
    assert not live[I.TEAM_COLUMNS.index("mp")]


def test_normalize_pads_are_zero(synth_samples):
    norms = I.normalize_fit(synth_samples)
    mask = synth_samples[0].home_mask.copy()
    mask[-1] = False
    z = I.normalize_apply(dataclasses.replace(synth_samples[0], home_mask=mask), norms)
    assert not z.home_players[-1].any()
    assert z.home_players[0].any()


def test_normalize_apply_keeps_constants(synth_samples):
    train, test = synth_samples[:30], synth_samples[30:]
    norms = I.normalize_fit(train)
    before = norms.fingerprint()
    for s in test:
        I.normalize_apply(s, norms)
    assert norms.fingerprint() == before
    assert I.NormConstants.from_dict(norms.to_dict()) == norms


def test_normalize_schema_mismatch(synth_samples):
    norms = I.normalize_fit(synth_samples)
    bad = I.NormConstants(norms.team_columns[:-1], norms.player_columns, norms.team_mean[:-1],
                          norms.team_scale[:-1], norms.player_mean, norms.player_scale)
    with pytest.raises(ContractError):
        I.normalize_apply(synth_samples[0], bad)


# ---------------------------------------------------------------- assembly


def test_baseline_width_and_oracle(synth_samples):
    x, y = I.assemble_baseline(synth_samples, n=10, stats=33)
    assert x.shape == (len(synth_samples), 66)
    s = synth_samples[7]
    idx = [I.TEAM_COLUMNS.index(c) for c in I.SHARED]
    oracle = []
    for m in (s.home, s.away):
        for j in idx:
            oracle.append(sum(m[r][j] for r in range(10)) / 10)
    np.testing.assert_allclose(x[7], oracle, rtol=0, atol=1e-12)
    assert y.tolist() == [s.label for s in synth_samples]


def test_baseline_single_game_window_is_last_game(synth_samples):
    x, _ = I.assemble_baseline(synth_samples[:3], n=1, stats=35)
    np.testing.assert_array_equal(x[2], np.concatenate([synth_samples[2].home[-1], synth_samples[2].away[-1]]))


@given(stats=st.lists(st.integers(0, 34), min_size=1, max_size=10, unique=True), count=st.integers(0, 20))
@settings(max_examples=20, deadline=None)
def test_baseline_shape_property(synth_samples, stats, count):
    x, y = I.assemble_baseline(synth_samples[:count], stats=stats)
    assert x.shape == (count, 2 * len(stats))
    assert y.shape == (count,)


def test_baseline_empty_subset():
    with pytest.raises(ContractError):
        I.assemble_baseline([], stats=[])


def test_resolve_stats_counts():
    assert len(I.resolve_stats(6)) == 6
    assert I.resolve_stats(33) == list(range(33))
    assert I.resolve_stats(35) == list(range(35))


def test_mamba_shapes(synth_samples):
    for s in synth_samples:
        assert s.home.shape == s.away.shape == (10, 35)
        assert s.home_players.shape == s.away_players.shape == (10, 10, 34)
    ds = I.assemble_mamba(synth_samples[:1])
    assert ds.matrices_per_sample() == 22
    assert len(ds.labels) == 1


def test_mamba_shape_deviation(synth_samples):
    s = synth_samples[0]
    bad = I.MatchupSample(s.game_id, s.date, s.season, s.phase, s.home_team, s.away_team, s.home[:9], s.away,
                          s.home_players, s.away_players, s.home_mask, s.away_mask, s.label)
    with pytest.raises(ContractError):
        I.assemble_mamba([bad])


# ---------------------------------------------------------------- parsing and dataset file


def test_parse_round_trip(synth_league, tmp_path):
    games_path, players_path = write_league(synth_league, tmp_path)
    games, players = I.parse_game_log(games_path, players_path)
    assert len(games) == 71
    assert [g.date for g in games] == sorted(g.date for g in games)
    assert {p.game_id for p in players} <= {g.game_id for g in games}


def test_parse_empty_file(tmp_path):
    games = tmp_path / "games.csv"
    players = tmp_path / "players.csv"
    games.write_text(",".join(I.GAME_HEADER) + "\n")
    players.write_text(",".join(I.PLAYER_HEADER) + "\n")
    assert I.parse_game_log(games, players) == ([], [])


def rewrite(src, dst, row_index, column, value):
    with open(src, newline="") as fh:
        rows = list(csv.reader(fh))
    rows[row_index + 1][rows[0].index(column)] = value
    with open(dst, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def test_parse_bad_percentage_names_row(synth_league, tmp_path):
    games_path, _ = write_league(synth_league, tmp_path)
    rewrite(games_path, tmp_path / "bad.csv", 4, "h_fg_pct", "1.7")
    with pytest.raises(ParseError, match="row 5"):
        I.parse_games(tmp_path / "bad.csv")


@pytest.mark.parametrize("value", ["nan", "inf", "abc"])
def test_parse_non_finite(synth_league, tmp_path, value):
    games_path, _ = write_league(synth_league, tmp_path)
    rewrite(games_path, tmp_path / "bad.csv", 0, "a_pts", value)
    with pytest.raises(ParseError, match="row 1"):
        I.parse_games(tmp_path / "bad.csv")


def test_parse_dangling_player(synth_league, tmp_path):
    games_path, players_path = write_league(synth_league, tmp_path)
    rewrite(players_path, tmp_path / "bad.csv", 2, "game_id", "NOPE")
    with pytest.raises(ParseError, match="row 3"):
        I.parse_game_log(games_path, tmp_path / "bad.csv")


def test_parse_missing_column(tmp_path):
    path = tmp_path / "games.csv"
    path.write_text(",".join(I.GAME_HEADER[:-1]) + "\n")
    with pytest.raises(ParseError, match="a_def_rtg"):
        I.parse_games(path)


def test_dataset_bytes_stable(synth_league, tmp_path):
    def run(sub):
        games_path, players_path = write_league(synth_league, tmp_path / sub)
        samples = I.build_samples(I.League(*I.parse_game_log(games_path, players_path)))
        return I.dumps_dataset(samples, I.season_norms(samples))

    a, b = run("a"), run("b")
    assert a == b
    samples, norms = I.loads_dataset(a)
    assert I.dumps_dataset(samples, norms) == a
