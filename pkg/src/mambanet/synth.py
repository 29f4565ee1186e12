"""Synthetic league with a planted, recoverable signal.

Each team carries a latent strength that drifts slowly from game to game.
Box-score stats are noisy readings of the team's strength on the day; the
home-win probability is a logistic function of the difference between the
two teams' rolling (last ``window`` games) strengths. Players split their
team's production by minutes share.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .ingest import GAME_HEADER, PLAYER_HEADER, SHARED, GameRecord, PlayerGameRecord

# abbr -> (mean, sd, loading on strength); loadings < 0 mean "lower is better"
TEAM_PROFILE = {
    "mp": (240.0, 0.0, 0.0), "fg": (40.0, 4.0, 0.5), "fga": (88.0, 6.0, 0.1),
    "fg_pct": (0.46, 0.03, 0.6), "fg3": (12.0, 3.0, 0.4), "fg3a": (33.0, 5.0, 0.1),
    "fg3_pct": (0.35, 0.05, 0.5), "ft": (17.0, 4.0, 0.2), "fta": (22.0, 5.0, 0.2),
    "ft_pct": (0.77, 0.06, 0.2), "orb": (10.0, 3.0, 0.2), "drb": (34.0, 4.0, 0.5),
    "trb": (44.0, 5.0, 0.5), "ast": (24.0, 4.0, 0.5), "stl": (7.5, 2.5, 0.3),
    "blk": (5.0, 2.0, 0.3), "tov": (14.0, 3.0, -0.4), "pf": (20.0, 3.5, -0.2),
    "pts": (110.0, 11.0, 0.6), "ts_pct": (0.57, 0.04, 0.6), "efg_pct": (0.53, 0.04, 0.6),
    "fg3a_rate": (0.37, 0.05, 0.0), "fta_rate": (0.25, 0.05, 0.1), "orb_pct": (0.23, 0.05, 0.3),
    "drb_pct": (0.77, 0.05, 0.4), "trb_pct": (0.50, 0.04, 0.5), "ast_pct": (0.60, 0.06, 0.3),
    "stl_pct": (0.08, 0.02, 0.3), "blk_pct": (0.08, 0.03, 0.3), "tov_pct": (0.12, 0.02, -0.4),
    "usg_pct": (1.0, 0.0, 0.0), "off_rtg": (110.0, 8.0, 0.6), "def_rtg": (110.0, 8.0, -0.6),
}
COUNT_COLUMNS = {"mp", "fg", "fga", "fg3", "fg3a", "ft", "fta", "orb", "drb", "trb", "ast", "stl",
                 "blk", "tov", "pf", "pts"}


@dataclass(frozen=True)
class SynthConfig:
    n_teams: int = 8
    rounds: int = 1            # double round-robins per season
    playoff_games: int = 15
    seasons: int = 1
    roster_size: int = 12
    window: int = 10
    beta: float = 3.0          # logit slope on rolling strength difference
    home_advantage: float = 0.2
    drift: float = 0.08        # per-game sd of the strength random walk
    form_noise: float = 0.5    # per-game sd of performance around strength
    seed: int = 3
    start: str = "2020-10-20"
    first_season: int = 2020


@dataclass
class League:
    games: list[GameRecord]
    players: list[PlayerGameRecord]
    rolling_diff: dict = field(default_factory=dict)   # game_id -> rolling strength difference
    win_prob: dict = field(default_factory=dict)       # game_id -> true home-win probability


def _round_robin(n: int) -> list[list[tuple[int, int]]]:
    """Circle-method double round-robin: 2(n-1) matchdays, each team once per day."""
    teams = list(range(n))
    days = []
    for r in range(n - 1):
        day = []
        for i in range(n // 2):
            a, b = teams[i], teams[n - 1 - i]
            day.append((a, b) if (r + i) % 2 == 0 else (b, a))
        days.append(day)
        teams = [teams[0]] + [teams[-1]] + teams[1:-1]
    return days + [[(b, a) for a, b in day] for day in days]


def _season_tag(year: int) -> str:
    return f"{year}-{(year + 1) % 100:02d}"


def _team_box(form: float, rng: np.random.Generator) -> dict:
    box = {}
    for c in SHARED:
        mean, sd, load = TEAM_PROFILE[c]
        z = load * form + np.sqrt(max(0.0, 1.0 - load * load)) * rng.standard_normal()
        v = mean + sd * z
        if c in COUNT_COLUMNS:
            v = float(max(0.0, round(v)))
        elif c.endswith("_pct") or c.endswith("_rate"):
            v = float(np.clip(round(v, 3), 0.0, 1.0))
        else:
            v = round(v, 1)
        box[c] = v
    return box


def generate_league(config: SynthConfig = SynthConfig()) -> League:
    if config.n_teams < 4 or config.n_teams % 2:
        raise ContractError("n_teams must be an even number >= 4")
    if config.rounds < 1:
        raise ContractError("rounds (games per pair) must be >= 1")
    rng = np.random.default_rng(config.seed)
    n = config.n_teams
    team_ids = [f"T{i + 1:02d}" for i in range(n)]
    strength = rng.standard_normal(n)
    history: list[list[float]] = [[] for _ in range(n)]
    rosters = [[f"{1000 * (t + 1) + j + 1}" for j in range(config.roster_size)] for t in range(n)]
    shares = [np.sort(rng.dirichlet(np.full(config.roster_size, 2.0)))[::-1] for _ in range(n)]
    skills = [rng.normal(0.0, 0.3, config.roster_size) for _ in range(n)]

    league = League([], [])
    day = dt.date.fromisoformat(config.start)
    counter = 0

    def play(h: int, a: int, date: dt.date, season: str, phase: str):
        nonlocal counter
        counter += 1
        gid = f"G{counter:05d}"
        for t in (h, a):
            strength[t] += config.drift * rng.standard_normal()
            history[t].append(float(strength[t]))
        roll = [float(np.mean(history[t][-config.window:])) for t in (h, a)]
        diff = roll[0] - roll[1]
        p = 1.0 / (1.0 + np.exp(-(config.beta * diff + config.home_advantage)))
        home_win = rng.random() < p
        forms = [strength[t] + config.form_noise * rng.standard_normal() for t in (h, a)]
        boxes = [_team_box(f, rng) for f in forms]
        pts = sorted([boxes[0]["pts"], boxes[1]["pts"]])
        if pts[0] == pts[1]:
            pts[1] += 1.0
        hp, ap = (pts[1], pts[0]) if home_win else (pts[0], pts[1])
        boxes[0]["pts"], boxes[1]["pts"] = hp, ap
        league.games.append(GameRecord(gid, date.isoformat(), season, team_ids[h], team_ids[a], hp, ap,
                                       tuple(boxes[0][c] for c in SHARED), tuple(boxes[1][c] for c in SHARED),
                                       phase))
        league.rolling_diff[gid] = diff
        league.win_prob[gid] = float(p)
        for t, box, margin in ((h, boxes[0], hp - ap), (a, boxes[1], ap - hp)):
            league.players.extend(_player_lines(gid, team_ids[t], rosters[t], shares[t], skills[t], box,
                                                margin, rng))

    for s in range(config.seasons):
        season = _season_tag(config.first_season + s)
        for _ in range(config.rounds):
            for matchday in _round_robin(n):
                for h, a in matchday:
                    play(h, a, day, season, "season")
                day += dt.timedelta(days=1)
        remaining = config.playoff_games
        while remaining > 0:
            order = rng.permutation(n)
            for i in range(0, n, 2):
                if remaining == 0:
                    break
                play(int(order[i]), int(order[i + 1]), day, season, "playoff")
                remaining -= 1
            day += dt.timedelta(days=1)
        day += dt.timedelta(days=60)
    return league


def _player_lines(gid, team, roster, shares, skills, box, margin, rng) -> list[PlayerGameRecord]:
    minutes = 240.0 * shares * rng.uniform(0.8, 1.2, len(roster))
    minutes = np.round(minutes * 240.0 / minutes.sum(), 1)
    lines = []
    for pid, mp, skill in zip(roster, minutes, skills):
        frac = mp / 240.0
        vals = []
        for c in SHARED:
            mean, sd, _ = TEAM_PROFILE[c]
            if c == "mp":
                v = float(mp)
            elif c in COUNT_COLUMNS:
                v = float(max(0.0, round(box[c] * frac * (1.0 + 0.3 * skill) + rng.normal(0.0, 1.0))))
            elif c == "usg_pct":
                v = float(np.clip(round(frac * (1.0 + skill) + rng.normal(0.0, 0.02), 3), 0.0, 1.0))
            elif c.endswith("_pct") or c.endswith("_rate"):
                v = float(np.clip(round(box[c] + sd * (skill + rng.normal(0.0, 1.0)), 3), 0.0, 1.0))
            else:
                v = round(box[c] + sd * (skill + rng.normal(0.0, 1.0)), 1)
            vals.append(v)
        pm = round(margin * frac * 5.0 + rng.normal(0.0, 3.0), 1)
        lines.append(PlayerGameRecord(gid, pid, team, tuple(vals) + (pm,)))
    return lines


def _fmt(v) -> str:
    return format(v, ".10g") if isinstance(v, float) else str(v)


def write_league(league: League, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    games_path, players_path = out / "games.csv", out / "players.csv"
    with open(games_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAME_HEADER + ["phase"])
        for g in league.games:
            w.writerow([g.game_id, g.date, g.season, g.home_team, g.away_team, _fmt(g.home_pts), _fmt(g.away_pts)]
                       + [_fmt(v) for v in g.home_stats] + [_fmt(v) for v in g.away_stats] + [g.phase])
    with open(players_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAYER_HEADER)
        for r in league.players:
            w.writerow([r.game_id, r.player_id, r.team_id] + [_fmt(v) for v in r.stats])
    return games_path, players_path
