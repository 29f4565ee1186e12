"""Game logs to model-ready windows.

Parses ``games.csv`` / ``players.csv``, replays games chronologically to
derive Elo and winning percentage, cuts n-game windows for teams and players,
picks each team's top-minutes players, z-scores columns and assembles the
mean-feature baseline matrix and the MambaNet tensors.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError, DimensionError, ParseError

log = logging.getLogger(__name__)

# (abbreviation, name) in the fixed table order; stats 1-33 are shared by teams and players
SHARED_STATS = [
    ("mp", "Minutes Played"), ("fg", "Field Goal"), ("fga", "Field Goal Attempts"),
    ("fg_pct", "Field Goal Percentage"), ("fg3", "3-Point Field Goal"),
    ("fg3a", "3-Point Field Goal Attempts"), ("fg3_pct", "3-Point Field Goal Percentage"),
    ("ft", "Free Throw"), ("fta", "Free Throw Attempts"), ("ft_pct", "Free Throw Percentage"),
    ("orb", "Offensive Rebound"), ("drb", "Defensive Rebound"), ("trb", "Total Rebound"),
    ("ast", "Assists"), ("stl", "Steals"), ("blk", "Blocks"), ("tov", "Turnover"),
    ("pf", "Personal Fouls"), ("pts", "Points"), ("ts_pct", "True Shooting Percentage"),
    ("efg_pct", "Effective Field Goal Percentage"), ("fg3a_rate", "3-Point Attempt Rate"),
    ("fta_rate", "Free Throw Attempt Rate"), ("orb_pct", "Offensive Rebound Percentage"),
    ("drb_pct", "Defensive Rebound Percentage"), ("trb_pct", "Total Rebound Percentage"),
    ("ast_pct", "Assist Percentage"), ("stl_pct", "Steal Percentage"), ("blk_pct", "Block Percentage"),
    ("tov_pct", "Turnover Percentage"), ("usg_pct", "Usage Percentage"),
    ("off_rtg", "Offensive Rating"), ("def_rtg", "Defensive Rating"),
]
SHARED = [abbr for abbr, _ in SHARED_STATS]
TEAM_COLUMNS = SHARED + ["win_pct", "elo"]
PLAYER_COLUMNS = SHARED + ["plus_minus"]
PERCENT_COLUMNS = [c for c in SHARED if c.endswith("_pct")]

# used by --stats N: first N entries; rebounding, shooting efficiency and assists lead
STAT_PRIORITY = [
    "drb", "fg_pct", "ast", "fg3_pct", "ft_pct", "tov", "orb", "trb", "stl", "blk", "pts",
    "fg3", "ft", "efg_pct", "ts_pct", "off_rtg", "def_rtg", "fga", "fg3a", "fta", "fg",
    "pf", "mp", "fg3a_rate", "fta_rate", "orb_pct", "drb_pct", "trb_pct", "ast_pct",
    "stl_pct", "blk_pct", "tov_pct", "usg_pct", "win_pct", "elo",
]

GAME_HEADER = (["game_id", "date", "season", "home_team", "away_team", "home_pts", "away_pts"]
               + [f"h_{c}" for c in SHARED] + [f"a_{c}" for c in SHARED])
PLAYER_HEADER = ["game_id", "player_id", "team_id"] + SHARED + ["plus_minus"]
PHASES = ("season", "playoff")

ELO_INITIAL = 1500.0
ELO_K = 20.0
ELO_GRID_BITS = 20  # rating changes are multiples of 2**-20
WINDOW = 10
TOP_PLAYERS = 10


@dataclass(frozen=True)
class GameRecord:
    game_id: str
    date: str
    season: str
    home_team: str
    away_team: str
    home_pts: float
    away_pts: float
    home_stats: tuple
    away_stats: tuple
    phase: str = "season"

    @property
    def home_win(self) -> int:
        return int(self.home_pts > self.away_pts)


@dataclass(frozen=True)
class PlayerGameRecord:
    game_id: str
    player_id: str
    team_id: str
    stats: tuple  # 33 shared stats then plus/minus


@dataclass
class TeamState:
    team: str
    elo: float = ELO_INITIAL
    wins: int = 0
    losses: int = 0
    season: str | None = None


@dataclass
class StatMatrix:
    """n x s window, oldest row first, with the source game of each row (pads repeat)."""

    values: np.ndarray
    game_ids: list
    dates: list
    n_real: int


@dataclass
class MatchupSample:
    game_id: str
    date: str
    season: str
    phase: str
    home_team: str
    away_team: str
    home: np.ndarray            # (n, 35)
    away: np.ndarray            # (n, 35)
    home_players: np.ndarray    # (10, n, 34)
    away_players: np.ndarray    # (10, n, 34)
    home_mask: np.ndarray       # (10,) True for real players
    away_mask: np.ndarray
    label: int
    home_player_ids: list = field(default_factory=list)
    away_player_ids: list = field(default_factory=list)
    sources: dict = field(default_factory=dict, repr=False)  # game ids feeding each matrix


# ---------------------------------------------------------------- parsing

def _float(raw: str, column: str, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"column {column!r}: cannot parse {raw!r} as a number", row) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value {raw!r}", row)
    return value


def _check_header(fieldnames, required, path) -> None:
    missing = [c for c in required if c not in (fieldnames or [])]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")


def parse_games(path) -> list[GameRecord]:
    games = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, GAME_HEADER, path)
        has_phase = "phase" in reader.fieldnames
        seen = set()
        for row_no, row in enumerate(reader, start=1):
            gid = row["game_id"]
            if gid in seen:
                raise ParseError(f"duplicate game_id {gid!r}", row_no)
            seen.add(gid)
            stats = {}
            for side in ("h", "a"):
                vals = []
                for c in SHARED:
                    v = _float(row[f"{side}_{c}"], f"{side}_{c}", row_no)
                    if c in PERCENT_COLUMNS and not 0.0 <= v <= 1.0:
                        raise ParseError(f"column {side}_{c}: percentage {v} outside [0, 1]", row_no)
                    vals.append(v)
                stats[side] = tuple(vals)
            home_pts = _float(row["home_pts"], "home_pts", row_no)
            away_pts = _float(row["away_pts"], "away_pts", row_no)
            if home_pts == away_pts:
                raise ParseError("tied final score; no winner", row_no)
            phase = row["phase"] if has_phase else "season"
            if phase not in PHASES:
                raise ParseError(f"phase must be one of {PHASES}, got {phase!r}", row_no)
            date = row["date"]
            try:
                dt.date.fromisoformat(date)
            except ValueError:
                raise ParseError(f"date {date!r} is not ISO-8601", row_no) from None
            games.append(GameRecord(gid, date, row["season"], row["home_team"], row["away_team"],
                                    home_pts, away_pts, stats["h"], stats["a"], phase))
    games.sort(key=lambda g: (g.date, g.game_id))
    return games


def parse_players(path, games: Sequence[GameRecord]) -> list[PlayerGameRecord]:
    by_id = {g.game_id: g for g in games}
    order = {g.game_id: i for i, g in enumerate(games)}
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, PLAYER_HEADER, path)
        for row_no, row in enumerate(reader, start=1):
            gid = row["game_id"]
            game = by_id.get(gid)
            if game is None:
                raise ParseError(f"player record references unknown game_id {gid!r}", row_no)
            team = row["team_id"]
            if team not in (game.home_team, game.away_team):
                raise ParseError(f"team_id {team!r} did not play in game {gid!r}", row_no)
            vals = tuple(_float(row[c], c, row_no) for c in PLAYER_COLUMNS)
            if vals[0] < 0:
                raise ParseError("minutes played must be >= 0", row_no)
            records.append(PlayerGameRecord(gid, row["player_id"], team, vals))
    records.sort(key=lambda r: (order[r.game_id], r.team_id, _id_key(r.player_id)))
    return records


def parse_game_log(games_path, players_path=None):
    """Parse the two CSV files; returns (games, player_records), both date-ordered."""
    games = parse_games(games_path)
    players = parse_players(players_path, games) if players_path is not None else []
    return games, players


def _id_key(player_id: str):
    return (0, int(player_id), "") if player_id.isdigit() else (1, 0, player_id)


# ---------------------------------------------------------------- derived team stats

def elo_expected(r_a: float, r_b: float) -> float:
    """Probability that a player rated ``r_a`` beats one rated ``r_b``.

    The favourite's probability p >= 1/2 is computed directly and the
    underdog gets 1 - p, which is exact in float64, so
    ``elo_expected(a, b) + elo_expected(b, a) == 1`` holds bit for bit.
    """
    if r_a >= r_b:
        return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))
    return 1.0 - 1.0 / (1.0 + 10.0 ** ((r_a - r_b) / 400.0))


def elo_update(state_home: TeamState, state_away: TeamState, home_won: bool, k: float = ELO_K):
    """Shift both ratings by ``k * (outcome - expected)``; the pair's total is unchanged.

    The shift is rounded to a multiple of ``2**-ELO_GRID_BITS``. Ratings that
    start on that grid (1500 does) stay on it, so both additions are exact in
    float64 and the total is conserved bit for bit.
    """
    if not k > 0:
        raise ContractError("Elo K must be positive")
    delta = k * ((1.0 if home_won else 0.0) - elo_expected(state_home.elo, state_away.elo))
    delta = math.ldexp(round(math.ldexp(delta, ELO_GRID_BITS)), -ELO_GRID_BITS)
    state_home.elo += delta
    state_away.elo -= delta
    return state_home.elo, state_away.elo


def winning_pct(state: TeamState) -> float:
    played = state.wins + state.losses
    return state.wins / played if played else 0.5


# ---------------------------------------------------------------- history and windows

class League:
    """Chronological replay of a game log, indexed for window queries."""

    def __init__(self, games: Sequence[GameRecord], players: Sequence[PlayerGameRecord] = (),
                 k: float = ELO_K):
        self.games = sorted(games, key=lambda g: (g.date, g.game_id))
        self.game_by_id = {g.game_id: g for g in self.games}
        self.states: dict[str, TeamState] = {}
        self.team_rows: dict[str, list] = {}   # team -> [(date, game_id, row35)]
        self.team_dates: dict[str, list] = {}
        self.player_rows: dict[str, list] = {}  # player -> [(date, game_id, row34)]
        self.player_dates: dict[str, list] = {}
        self.roster: dict[tuple, list] = {}    # (game_id, team) -> [(player_id, minutes)]

        for g in self.games:
            home = self._state(g.home_team, g.season)
            away = self._state(g.away_team, g.season)
            elo_update(home, away, bool(g.home_win), k)
            winner, loser = (home, away) if g.home_win else (away, home)
            winner.wins += 1
            loser.losses += 1
            for team, stats, st in ((g.home_team, g.home_stats, home), (g.away_team, g.away_stats, away)):
                row = np.array(stats + (winning_pct(st), st.elo), dtype=np.float64)
                self.team_rows.setdefault(team, []).append((g.date, g.game_id, row))
                self.team_dates.setdefault(team, []).append(g.date)
        order = {g.game_id: i for i, g in enumerate(self.games)}
        for r in sorted(players, key=lambda r: (order[r.game_id], r.team_id, _id_key(r.player_id))):
            date = self.game_by_id[r.game_id].date
            self.player_rows.setdefault(r.player_id, []).append((date, r.game_id, np.array(r.stats)))
            self.player_dates.setdefault(r.player_id, []).append(date)
            self.roster.setdefault((r.game_id, r.team_id), []).append((r.player_id, r.stats[0]))

    def _state(self, team: str, season: str) -> TeamState:
        st = self.states.setdefault(team, TeamState(team))
        if st.season != season:
            st.wins = st.losses = 0
            st.season = season
        return st

    def window_team(self, team: str, date: str, n: int = WINDOW) -> StatMatrix:
        """Last ``n`` games of ``team`` dated strictly before ``date``, oldest first."""
        return _window(self.team_rows.get(team, []), self.team_dates.get(team, []), date, n, f"team {team!r}")

    def window_player(self, player: str, date: str, n: int = WINDOW) -> StatMatrix:
        return _window(self.player_rows.get(player, []), self.player_dates.get(player, []), date, n,
                       f"player {player!r}")

    def prior_games(self, team: str, date: str) -> int:
        return bisect.bisect_left(self.team_dates.get(team, []), date)

    def select_top_players(self, team: str, date: str, n: int = WINDOW, count: int = TOP_PLAYERS) -> list:
        """Players with the most summed minutes over the team's last ``n`` games.

        Ties go to the lower player id. Missing slots are ``None`` (all-pad players).
        """
        end = self.prior_games(team, date)
        if end == 0:
            raise DegenerateInputError(f"team {team!r} has no games before {date}")
        minutes: dict[str, float] = {}
        for _, gid, _ in self.team_rows[team][max(0, end - n):end]:
            for pid, mp in self.roster.get((gid, team), []):
                minutes[pid] = minutes.get(pid, 0.0) + mp
        ranked = sorted(minutes, key=lambda p: (-minutes[p], _id_key(p)))[:count]
        return ranked + [None] * (count - len(ranked))


def _window(rows, dates, date, n, label) -> StatMatrix:
    if n < 1:
        raise ContractError("window length n must be >= 1")
    end = bisect.bisect_left(dates, date)
    if end == 0:
        raise DegenerateInputError(f"{label} has no games before {date}")
    chosen = rows[max(0, end - n):end]
    pad = n - len(chosen)
    chosen = [chosen[0]] * pad + chosen
    return StatMatrix(np.stack([r[2] for r in chosen]), [r[1] for r in chosen], [r[0] for r in chosen],
                      n - pad)


def window_team(league: League, team: str, date: str, n: int = WINDOW) -> StatMatrix:
    return league.window_team(team, date, n)


def select_top_players(league: League, team: str, date: str, n: int = WINDOW) -> list:
    return league.select_top_players(team, date, n)


def build_samples(league: League, n: int = WINDOW, n_players: int = TOP_PLAYERS) -> list[MatchupSample]:
    """One sample per game whose two teams both have earlier games; others are skipped and logged."""
    samples = []
    skipped = 0
    for g in league.games:
        try:
            home = league.window_team(g.home_team, g.date, n)
            away = league.window_team(g.away_team, g.date, n)
        except DegenerateInputError as exc:
            skipped += 1
            log.debug("skipping %s: %s", g.game_id, exc)
            continue
        sides = {}
        for side, team in (("home", g.home_team), ("away", g.away_team)):
            ids = league.select_top_players(team, g.date, n, n_players)
            mats = np.zeros((n_players, n, len(PLAYER_COLUMNS)))
            mask = np.zeros(n_players, dtype=bool)
            src = []
            for i, pid in enumerate(ids):
                if pid is None:
                    src.append([])
                    continue
                w = league.window_player(pid, g.date, n)
                mats[i] = w.values
                mask[i] = True
                src.append(w.game_ids)
            sides[side] = (ids, mats, mask, src)
        samples.append(MatchupSample(
            g.game_id, g.date, g.season, g.phase, g.home_team, g.away_team, home.values, away.values,
            sides["home"][1], sides["away"][1], sides["home"][2], sides["away"][2], g.home_win,
            sides["home"][0], sides["away"][0],
            sources={"home": home.game_ids, "away": away.game_ids,
                     "home_players": sides["home"][3], "away_players": sides["away"][3]}))
    if skipped:
        log.info("skipped %d game(s) with a team lacking prior games", skipped)
    return samples


# ---------------------------------------------------------------- normalization

@dataclass(frozen=True)
class NormConstants:
    team_columns: tuple
    player_columns: tuple
    team_mean: tuple
    team_scale: tuple   # 1/std, 0 for constant columns
    player_mean: tuple
    player_scale: tuple

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in
                ("team_columns", "player_columns", "team_mean", "team_scale", "player_mean", "player_scale")}

    @classmethod
    def from_dict(cls, d: dict) -> "NormConstants":
        return cls(*(tuple(d[k]) for k in
                     ("team_columns", "player_columns", "team_mean", "team_scale", "player_mean", "player_scale")))


def _moments(rows: np.ndarray):
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    scale = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), 1.0 / np.where(std > 0, std, 1.0), 0.0)
    return mean, scale


def normalize_fit(samples: Sequence[MatchupSample]) -> NormConstants:
    """Per-column z-score constants from training samples (real players only)."""
    if not samples:
        raise ContractError("normalize_fit needs at least one sample")
    team_rows = np.concatenate([np.concatenate([s.home, s.away]) for s in samples])
    player_rows = [m[mask].reshape(-1, m.shape[-1]) for s in samples
                   for m, mask in ((s.home_players, s.home_mask), (s.away_players, s.away_mask))]
    player_rows = np.concatenate(player_rows)
    if len(player_rows) == 0:
        player_rows = np.zeros((1, len(PLAYER_COLUMNS)))
    tm, ts = _moments(team_rows)
    pm, ps = _moments(player_rows)
    return NormConstants(tuple(TEAM_COLUMNS), tuple(PLAYER_COLUMNS), tuple(tm), tuple(ts), tuple(pm), tuple(ps))


def normalize_apply(sample: MatchupSample, constants: NormConstants) -> MatchupSample:
    """New sample with z-scored matrices; pad players become all-zero rows."""
    if (list(constants.team_columns) != TEAM_COLUMNS or list(constants.player_columns) != PLAYER_COLUMNS
            or sample.home.shape[-1] != len(constants.team_mean)
            or sample.home_players.shape[-1] != len(constants.player_mean)):
        raise ContractError("normalization constants were fitted on a different schema")
    tm, ts = np.array(constants.team_mean), np.array(constants.team_scale)
    pm, ps = np.array(constants.player_mean), np.array(constants.player_scale)

    def players(m, mask):
        out = (m - pm) * ps
        out[~mask] = 0.0
        return out

    return MatchupSample(
        sample.game_id, sample.date, sample.season, sample.phase, sample.home_team, sample.away_team,
        (sample.home - tm) * ts, (sample.away - tm) * ts,
        players(sample.home_players, sample.home_mask), players(sample.away_players, sample.away_mask),
        sample.home_mask.copy(), sample.away_mask.copy(), sample.label,
        list(sample.home_player_ids), list(sample.away_player_ids), sample.sources)


# ---------------------------------------------------------------- assembly

def resolve_stats(stats) -> list[int]:
    """Column indices into the team schema from names, indices, or a count (first N by priority)."""
    if isinstance(stats, int):
        if not 1 <= stats <= len(TEAM_COLUMNS):
            raise ContractError(f"stat count must be in 1..{len(TEAM_COLUMNS)}")
        if stats == len(SHARED):
            names = SHARED
        elif stats == len(TEAM_COLUMNS):
            names = TEAM_COLUMNS
        else:
            names = STAT_PRIORITY[:stats]
        return sorted(TEAM_COLUMNS.index(c) for c in names)
    out = []
    for s in stats:
        if isinstance(s, str):
            if s not in TEAM_COLUMNS:
                raise ContractError(f"unknown team stat {s!r}")
            out.append(TEAM_COLUMNS.index(s))
        else:
            if not 0 <= int(s) < len(TEAM_COLUMNS):
                raise ContractError(f"stat index {s} outside team schema")
            out.append(int(s))
    if not out:
        raise ContractError("stat subset is empty")
    return out


def assemble_baseline(samples: Sequence[MatchupSample], n: int = WINDOW, stats=len(SHARED)):
    """Design matrix (len(samples) x 2s) of home then away window means, and labels."""
    idx = resolve_stats(stats)
    if not samples:
        return np.zeros((0, 2 * len(idx))), np.zeros(0, dtype=int)
    rows = []
    for s in samples:
        if n > s.home.shape[0]:
            raise ContractError(f"n={n} exceeds window length {s.home.shape[0]}")
        rows.append(np.concatenate([s.home[-n:, idx].mean(axis=0), s.away[-n:, idx].mean(axis=0)]))
    x = np.stack(rows)
    if x.shape != (len(samples), 2 * len(idx)):
        raise ContractError(f"baseline matrix shape {x.shape} != ({len(samples)}, {2 * len(idx)})")
    return x, np.array([s.label for s in samples], dtype=int)


@dataclass
class MambaDataset:
    teams: np.ndarray     # (N, 2, n, 35) home then away
    players: np.ndarray   # (N, 2, 10, n, 34)
    masks: np.ndarray     # (N, 2, 10)
    labels: np.ndarray    # (N,)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "MambaDataset":
        return MambaDataset(self.teams[idx], self.players[idx], self.masks[idx], self.labels[idx])

    def matrices_per_sample(self) -> int:
        return self.teams.shape[1] + self.players.shape[1] * self.players.shape[2]


def assemble_mamba(samples: Sequence[MatchupSample], n: int = WINDOW, n_players: int = TOP_PLAYERS) -> MambaDataset:
    team_shape = (n, len(TEAM_COLUMNS))
    player_shape = (n_players, n, len(PLAYER_COLUMNS))
    for s in samples:
        for m in (s.home, s.away):
            if m.shape != team_shape:
                raise ContractError(f"{s.game_id}: team matrix shape {m.shape} != {team_shape}")
        for m in (s.home_players, s.away_players):
            if m.shape != player_shape:
                raise ContractError(f"{s.game_id}: player matrices shape {m.shape} != {player_shape}")
    if not samples:
        return MambaDataset(np.zeros((0, 2) + team_shape), np.zeros((0, 2) + player_shape),
                            np.zeros((0, 2, n_players), bool), np.zeros(0, int))
    return MambaDataset(
        np.stack([np.stack([s.home, s.away]) for s in samples]),
        np.stack([np.stack([s.home_players, s.away_players]) for s in samples]),
        np.stack([np.stack([s.home_mask, s.away_mask]) for s in samples]),
        np.array([s.label for s in samples], dtype=int))


# ---------------------------------------------------------------- dataset file

DATASET_MAGIC = b"MNDS1"
SCHEMA_VERSION = 1


def dumps_dataset(samples: Sequence[MatchupSample], norms: dict[str, NormConstants] | None = None) -> bytes:
    """Binary dataset container.

    ``b"MNDS1"``, u64 header length, UTF-8 JSON header (sorted keys: schema
    version, columns, window, normalization constants, per-sample metadata),
    then per sample the raw little-endian f64 values of home, away,
    home_players, away_players followed by the two player masks as u8.
    """
    n = samples[0].home.shape[0] if samples else WINDOW
    header = {
        "schema_version": SCHEMA_VERSION, "team_columns": TEAM_COLUMNS, "player_columns": PLAYER_COLUMNS,
        "window": n, "top_players": TOP_PLAYERS,
        "norms": {k: v.to_dict() for k, v in sorted((norms or {}).items())},
        "samples": [{"game_id": s.game_id, "date": s.date, "season": s.season, "phase": s.phase,
                     "home_team": s.home_team, "away_team": s.away_team, "label": int(s.label),
                     "home_player_ids": s.home_player_ids, "away_player_ids": s.away_player_ids}
                    for s in samples],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = [DATASET_MAGIC, struct.pack("<Q", len(head)), head]
    for s in samples:
        for arr in (s.home, s.away, s.home_players, s.away_players):
            body.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        body.append(s.home_mask.astype(np.uint8).tobytes() + s.away_mask.astype(np.uint8).tobytes())
    return b"".join(body)


def loads_dataset(buf: bytes):
    if buf[:5] != DATASET_MAGIC:
        raise ParseError("not an MNDS1 dataset file")
    (hlen,) = struct.unpack("<Q", buf[5:13])
    header = json.loads(buf[13:13 + hlen])
    if header["schema_version"] != SCHEMA_VERSION:
        raise ParseError(f"unsupported dataset schema version {header['schema_version']}")
    n, k = header["window"], header["top_players"]
    nt, npc = len(header["team_columns"]), len(header["player_columns"])
    pos = 13 + hlen

    def take(shape, dtype="<f8", size=8):
        nonlocal pos
        count = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(shape)
        pos += count * size
        return arr.astype(np.float64) if dtype == "<f8" else arr.astype(bool)

    samples = []
    for meta in header["samples"]:
        home, away = take((n, nt)), take((n, nt))
        hp, ap = take((k, n, npc)), take((k, n, npc))
        hm, am = take((k,), "u1", 1), take((k,), "u1", 1)
        samples.append(MatchupSample(meta["game_id"], meta["date"], meta["season"], meta["phase"],
                                     meta["home_team"], meta["away_team"], home, away, hp, ap, hm, am,
                                     meta["label"], meta["home_player_ids"], meta["away_player_ids"]))
    if pos != len(buf):
        raise ParseError("trailing bytes in dataset file")
    norms = {k_: NormConstants.from_dict(v) for k_, v in header["norms"].items()}
    return samples, norms


def save_dataset(path, samples, norms=None):
    Path(path).write_bytes(dumps_dataset(samples, norms))


def load_dataset(path):
    return loads_dataset(Path(path).read_bytes())


def season_norms(samples: Iterable[MatchupSample]) -> dict[str, NormConstants]:
    """Constants per season tag, fitted on that season's regular-season samples."""
    by_season: dict[str, list] = {}
    for s in samples:
        if s.phase == "season":
            by_season.setdefault(s.season, []).append(s)
    return {season: normalize_fit(ss) for season, ss in sorted(by_season.items())}
