"""Command-line entry point.

Commands share one output directory (``--out``)::

    <out>/fins/fin_<kind>.finc(.meta)   pretrain-fins
    <out>/data/games.csv, players.csv   synth
    <out>/dataset.mnds                  ingest
    <out>/model/                        train
    <out>/report.{csv,json,txt}         eval, ablate

Settings come from an INI file (``--config``) with sections ``[paths]``,
``[fin]``, ``[synth]``, ``[model]`` and ``[experiment]``; flags override it.
The resolved configuration is written next to every output as
``<command>.ini``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import logging
import sys
from pathlib import Path

from . import fin as finlib
from .errors import MambaError
from .evaluation import emit_report, make_splits, run_ablation, run_experiment
from .ingest import League, build_samples, load_dataset, parse_game_log, save_dataset, season_norms
from .model import VARIANTS, ModelConfig, save_model, train, build_model
from .numerics.optim import OptimizerConfig
from .synth import SynthConfig, generate_league, write_league

log = logging.getLogger("mambanet")

SECTIONS = ("paths", "fin", "synth", "model", "experiment")
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config

def _coerce(raw: str, like):
    if isinstance(like, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        return tuple(int(x) if x.strip().lstrip("-").isdigit() else x.strip() for x in raw.split(",") if x.strip())
    return raw


def _apply(obj, section: dict, skip=()):
    """Return a copy of dataclass ``obj`` with matching keys of ``section`` applied."""
    fields = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in fields:
            raise UsageError(f"unknown config key {key!r} for {type(obj).__name__}")
        current = getattr(obj, key)
        if key == "stats":
            changes[key] = int(raw) if raw.strip().isdigit() else tuple(s.strip() for s in raw.split(","))
        else:
            changes[key] = _coerce(raw, current)
    return dataclasses.replace(obj, **changes)


@dataclasses.dataclass
class RunConfig:
    out: Path
    seed: int
    paths: dict
    fin: finlib.FINConfig
    synth: SynthConfig
    model: ModelConfig
    experiment: dict
    kinds: tuple

    def path(self, key: str, default: Path) -> Path:
        return Path(self.paths[key]) if self.paths.get(key) else default

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["paths"] = {k: str(v) for k, v in sorted(self.paths.items())}
        cp["paths"]["out"] = str(self.out)
        fin_d = {f.name: getattr(self.fin, f.name) for f in dataclasses.fields(self.fin) if f.name != "optimizer"}
        fin_d["lr"] = self.fin.optimizer.lr
        fin_d["kinds"] = ",".join(self.kinds)
        cp["fin"] = {k: str(v) for k, v in fin_d.items()}
        cp["synth"] = {f.name: str(getattr(self.synth, f.name)) for f in dataclasses.fields(self.synth)}
        model_d = {}
        for f in dataclasses.fields(self.model):
            v = getattr(self.model, f.name)
            if f.name == "optimizer":
                model_d["lr"] = str(v.lr)
            elif isinstance(v, tuple):
                model_d[f.name] = ",".join(str(x) for x in v)
            else:
                model_d[f.name] = str(v)
        cp["model"] = model_d
        cp["experiment"] = {k: str(v) for k, v in sorted(self.experiment.items())}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def load_config(args) -> RunConfig:
    cp = configparser.ConfigParser()
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} does not exist")
        cp.read(path)
        unknown = [s for s in cp.sections() if s not in SECTIONS]
        if unknown:
            raise UsageError(f"unknown config section(s): {', '.join(unknown)}")
    sec = {s: dict(cp[s]) if cp.has_section(s) else {} for s in SECTIONS}
    seed = args.seed if args.seed is not None else int(sec["experiment"].get("seed", DEFAULT_SEED))
    out = Path(args.out or sec["paths"].get("out", "runs"))

    fin_sec = dict(sec["fin"])
    kinds = tuple(k.strip() for k in fin_sec.pop("kinds", ",".join(k.value for k in finlib.ALL_KINDS)).split(","))
    fin_lr = fin_sec.pop("lr", None)
    fin_cfg = _apply(finlib.FINConfig(), fin_sec)
    if fin_lr is not None:
        fin_cfg = dataclasses.replace(fin_cfg, optimizer=dataclasses.replace(fin_cfg.optimizer, lr=float(fin_lr)))

    synth_cfg = _apply(SynthConfig(seed=seed), sec["synth"])

    model_sec = dict(sec["model"])
    model_lr = model_sec.pop("lr", None)
    model_sec.pop("seed", None)
    model_cfg = _apply(ModelConfig(seed=seed), model_sec)
    if model_lr is not None:
        model_cfg = dataclasses.replace(model_cfg, optimizer=OptimizerConfig(lr=float(model_lr)))
    paths = {k: v for k, v in sec["paths"].items() if k != "out"}
    experiment = dict(sec["experiment"])
    experiment["seed"] = seed
    return RunConfig(out, seed, paths, fin_cfg, synth_cfg, model_cfg, experiment, kinds)


def _persist(cfg: RunConfig, command: str):
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{command}.ini").write_text(cfg.to_ini())


def _need(path: Path, what: str, command: str) -> Path:
    if not path.exists():
        raise MambaError(f"{what} not found at {path}; run `mambanet {command}` first")
    return path


# ---------------------------------------------------------------- commands

def cmd_pretrain_fins(cfg: RunConfig, args) -> int:
    kinds = tuple(args.kinds.split(",")) if args.kinds else cfg.kinds
    for k in kinds:
        finlib.FeatureKind(k)
    fin_dir = cfg.path("fins", cfg.out / "fins")
    fin_dir.mkdir(parents=True, exist_ok=True)
    fcfg = cfg.fin if args.seed is None else dataclasses.replace(cfg.fin, seed=cfg.seed)
    fins = finlib.pretrain_fins(kinds, fcfg)
    failed = []
    for kind, fin in fins.items():
        finlib.save_fin(fin, fin_dir / f"fin_{kind.value}.finc")
        r2 = fin.metadata["val_r2"]
        print(f"{kind.value:9s} held-out R^2 = {r2:.4f}  (epochs {fin.metadata['epochs']})")
        if r2 < fcfg.r2_floor:
            failed.append(kind.value)
    _persist(cfg, "pretrain-fins")
    if failed:
        print(f"error: R^2 below floor {fcfg.r2_floor} for {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    scfg = cfg.synth
    overrides = {k: v for k, v in (("n_teams", args.teams), ("rounds", args.rounds),
                                    ("playoff_games", args.playoff_games), ("seasons", args.seasons))
                 if v is not None}
    scfg = dataclasses.replace(scfg, **overrides)
    league = generate_league(scfg)
    data_dir = cfg.out / "data"
    games, players = write_league(league, data_dir)
    n_season = sum(g.phase == "season" for g in league.games)
    print(f"wrote {games} ({n_season} season + {len(league.games) - n_season} playoff games) and {players}")
    cfg.synth = scfg
    _persist(cfg, "synth")
    return 0


def _load_fins(cfg: RunConfig, kinds) -> dict:
    fin_dir = cfg.path("fins", cfg.out / "fins")
    out = {}
    for k in kinds:
        out[k] = finlib.load_fin(_need(fin_dir / f"fin_{k}.finc", f"{k} FIN weights", "pretrain-fins"))
    return out


def _ingest(cfg: RunConfig, games_path: Path, players_path: Path | None):
    games, players = parse_game_log(games_path, players_path)
    return build_samples(League(games, players), n=cfg.model.window)


def cmd_ingest(cfg: RunConfig, args) -> int:
    games_path = _need(Path(args.games) if args.games else cfg.path("games", cfg.out / "data" / "games.csv"),
                       "games.csv", "synth")
    players_path = Path(args.players) if args.players else cfg.path("players", games_path.parent / "players.csv")
    samples = _ingest(cfg, games_path, players_path if players_path.exists() else None)
    target = cfg.path("dataset", cfg.out / "dataset.mnds")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(target, samples, season_norms(samples))
    print(f"wrote {target} ({len(samples)} samples)")
    _persist(cfg, "ingest")
    return 0


def _samples(cfg: RunConfig, path=None):
    target = Path(path) if path else cfg.path("dataset", cfg.out / "dataset.mnds")
    return load_dataset(_need(target, "dataset", "ingest"))[0]


def _model_config(cfg: RunConfig, args) -> ModelConfig:
    mcfg = cfg.model
    if getattr(args, "variant", None):
        mcfg = dataclasses.replace(mcfg, variant=args.variant, kinds=())
    if getattr(args, "stats", None):
        mcfg = dataclasses.replace(mcfg, stats=args.stats)
    if getattr(args, "epochs", None):
        mcfg = dataclasses.replace(mcfg, max_epochs=args.epochs)
    return mcfg


def cmd_train(cfg: RunConfig, args) -> int:
    from .ingest import assemble_mamba, normalize_apply, normalize_fit
    mcfg = _model_config(cfg, args)
    samples = _samples(cfg)
    seasons = sorted({s.season for s in samples})
    season = args.season or seasons[-1]
    train_s = [s for s in samples if s.season == season and s.phase == "season"]
    if not train_s:
        raise MambaError(f"no regular-season samples for season {season!r}")
    fins = _load_fins(cfg, mcfg.kinds)
    norms = normalize_fit(train_s)
    ds = assemble_mamba([normalize_apply(s, norms) for s in train_s], n=mcfg.window)
    net = build_model(mcfg, fins, n_team_stats=ds.teams.shape[-1], **(
        {"n_player_stats": ds.players.shape[-1], "n_players": ds.players.shape[2]} if mcfg.is_mamba else {}))
    train(net, ds, mcfg, norms)
    target = save_model(net, cfg.out / "model", ds)
    print(f"trained {mcfg.variant} on {season} ({len(ds)} samples); best validation {net.metadata['best_val']:.3f}; "
          f"saved to {target}")
    _persist(cfg, "train")
    return 0


def _splits(cfg: RunConfig, args):
    target = cfg.path("dataset", cfg.out / "dataset.mnds")
    name = target.stem
    primary = _samples(cfg)
    splits = make_splits({name: primary})
    foreign = getattr(args, "cross_dataset", None) or cfg.experiment.get("cross_dataset")
    if foreign:
        datasets = {name: primary, Path(foreign).stem: _samples(cfg, foreign)}
        splits += make_splits(datasets, cross=[(name, Path(foreign).stem)], within=False)
    return splits


def cmd_eval(cfg: RunConfig, args) -> int:
    mcfg = _model_config(cfg, args)
    fins = _load_fins(cfg, mcfg.kinds) if mcfg.kinds else {}
    splits = _splits(cfg, args)
    if not splits:
        raise MambaError("no season has both regular-season and playoff samples")
    reports = run_experiment(splits, mcfg, fins, timing=args.timing)
    for p in emit_report(reports, cfg.out):
        print(f"wrote {p}")
    _persist(cfg, "eval")
    return 0


def cmd_ablate(cfg: RunConfig, args) -> int:
    mcfg = _model_config(cfg, args)
    fins = _load_fins(cfg, [k.value for k in finlib.ALL_KINDS])
    splits = _splits(cfg, args)
    if not splits:
        raise MambaError("no season has both regular-season and playoff samples")
    reports = run_ablation(splits, fins, cfg.seed, mcfg, timing=args.timing)
    for p in emit_report(reports, cfg.out):
        print(f"wrote {p}")
    print((cfg.out / "report.txt").read_text(), end="")
    _persist(cfg, "ablate")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global seed (overrides config)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: runs)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging")

    parser = argparse.ArgumentParser(prog="mambanet", description="FIN-based playoff outcome prediction.")
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
    parser.add_argument("--out", default=None, help="output directory (default: runs)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("pretrain-fins", parents=[common], help="train the four feature imitating networks")
    p.add_argument("--kinds", help="comma-separated subset of mean,std,variance,skewness")
    p.set_defaults(func=cmd_pretrain_fins)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic planted-signal league")
    p.add_argument("--teams", type=int, help="number of teams (even, >= 4)")
    p.add_argument("--rounds", type=int, help="double round-robins per season")
    p.add_argument("--playoff-games", type=int, help="playoff games per season")
    p.add_argument("--seasons", type=int, help="number of seasons")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="parse CSV logs into a dataset file")
    p.add_argument("--games", help="games.csv path")
    p.add_argument("--players", help="players.csv path")
    p.set_defaults(func=cmd_ingest)

    for name, func, text in (("train", cmd_train, "train one model on a season's regular-season games"),
                             ("eval", cmd_eval, "season-train / playoff-test evaluation of one variant"),
                             ("ablate", cmd_ablate, "evaluate ablation rows 1-4 on every season")):
        p = sub.add_parser(name, parents=[common], help=text)
        if name != "ablate":
            p.add_argument("--variant", choices=VARIANTS, help="model variant")
            p.add_argument("--stats", type=int, help="number of team stats for findff/logistic (6, 14, 15, 20, 33, ...)")
        p.add_argument("--epochs", type=int, help="maximum training epochs")
        if name == "train":
            p.add_argument("--season", help="season tag to train on (default: latest)")
        else:
            p.add_argument("--cross-dataset", help="second dataset file whose playoffs form extra test sets")
            p.add_argument("--timing", action="store_true", help="record wall-clock seconds in reports")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (MambaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
