import numpy as np
import pytest

from mambanet import fin as F
from mambanet.ingest import SHARED, GameRecord, League, PlayerGameRecord, build_samples
from mambanet.synth import SynthConfig, generate_league


def make_game(gid, date, home, away, home_pts=100.0, away_pts=90.0, season="2020-21", phase="season", fill=None):
    stats = tuple(0.5 if fill is None else fill for _ in SHARED)
    return GameRecord(gid, date, season, home, away, home_pts, away_pts, stats, stats, phase)


def make_player(gid, pid, team, minutes, fill=1.0):
    return PlayerGameRecord(gid, pid, team, (minutes,) + tuple(fill for _ in SHARED[1:]) + (0.0,))


@pytest.fixture(scope="session")
def synth_league():
    return generate_league(SynthConfig())


@pytest.fixture(scope="session")
def synth_samples(synth_league):
    return build_samples(League(synth_league.games, synth_league.players))


@pytest.fixture(scope="session")
def random_fins():
    """Untrained full FINs for every kind; enough for shape and plumbing tests."""
    rng = np.random.default_rng(0)
    return {k: F.build_fin(k, F.SIGNAL_LENGTH, rng) for k in F.ALL_KINDS}
