"""Season-train / playoff-test evaluation, the ablation ladder and report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError
from .ingest import MatchupSample, NormConstants, assemble_mamba, normalize_apply, normalize_fit
from .metrics import auc, permutation_null
from .model import ModelConfig, Network, build_model, train

log = logging.getLogger(__name__)

ABLATION_ROWS = ("mamba-row1", "mamba-row2", "mamba-row3", "mamba-row4")
CSV_COLUMNS = ["dataset", "variant", "n_train", "n_test", "auc", "seed", "wall_s"]
KIND_ABBR = {"mean": "m", "std": "std", "variance": "v", "skewness": "s"}


@dataclass
class Split:
    name: str
    train: list
    test: list

    def __post_init__(self):
        overlap = {s.game_id for s in self.train} & {s.game_id for s in self.test}
        if overlap:
            raise ContractError(f"split {self.name}: {len(overlap)} sample(s) on both sides")


@dataclass
class EvalReport:
    dataset: str
    variant: str
    auc: float
    n_train: int
    n_test: int
    seed: int
    wall_s: float | None = None
    n_params: int = 0
    null_p99: float | None = None
    descriptor: dict = field(default_factory=dict)
    predictions: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    game_ids: list = field(default_factory=list)


def make_splits(datasets: dict[str, Sequence[MatchupSample]],
                cross: Sequence[tuple[str, str]] = (), within: bool = True) -> list[Split]:
    """One split per (dataset, season) plus cross-dataset splits.

    Same-dataset splits train on a season's regular-season samples and test on
    that season's playoff samples. A cross pair ``(a, b)`` trains on each
    season of ``a`` and tests on every playoff sample of ``b``. ``within=False``
    produces the cross splits only.
    """
    splits = []
    for name, samples in (datasets.items() if within else ()):
        for season in sorted({s.season for s in samples}):
            train_s = [s for s in samples if s.season == season and s.phase == "season"]
            test_s = [s for s in samples if s.season == season and s.phase == "playoff"]
            if not test_s:
                log.warning("%s %s has no playoff games; skipped", name, season)
                continue
            if not train_s:
                log.warning("%s %s has no regular-season games; skipped", name, season)
                continue
            if max(s.date for s in train_s) >= min(s.date for s in test_s):
                raise ContractError(f"{name} {season}: regular-season games overlap the playoffs")
            splits.append(Split(f"{name}:{season}", train_s, test_s))
    for a, b in cross:
        foreign = [s for s in datasets[b] if s.phase == "playoff"]
        for season in sorted({s.season for s in datasets[a]}):
            train_s = [s for s in datasets[a] if s.season == season and s.phase == "season"]
            if train_s and foreign:
                splits.append(Split(f"{a}:{season}->{b}", train_s, foreign))
    return splits


def descriptor(config: ModelConfig) -> dict:
    """Row description in the ablation-table style."""
    kinds = " ".join(KIND_ABBR[k] for k in config.kinds) or "-"
    if config.variant == "logistic" or config.variant == "findff":
        from .ingest import resolve_stats
        fc = str(len(resolve_stats(config.stats)))
        return {"R": config.variant, "FS": "T", "FC": fc, "IF": kinds,
                "Layers": "Logistic" if config.variant == "logistic" else "Dense"}
    layers = "Dense" + (" Conv" if config.use_players else "") + (" RNN" if config.use_rnn else "")
    return {"R": config.variant[-1], "FS": "T P" if config.use_players else "T",
            "FC": "35 34" if config.use_players else "35", "IF": kinds, "Layers": layers}


def evaluate_split(split: Split, config: ModelConfig, fins: dict | None = None, *,
                   n_shuffles: int = 1000, timing: bool = False) -> tuple[EvalReport, Network]:
    """Normalize on the training side, train, score the test side."""
    t0 = time.perf_counter()
    norms = normalize_fit(split.train)
    train_ds = assemble_mamba([normalize_apply(s, norms) for s in split.train], n=config.window)
    test_ds = assemble_mamba([normalize_apply(s, norms) for s in split.test], n=config.window)
    net = build_model(config, fins, **_dims(train_ds, config))
    train(net, train_ds, config, norms)
    probs = net.predict_dataset(test_ds)
    labels = test_ds.labels
    value = auc(probs, labels) if labels.min() != labels.max() else float("nan")
    null = None
    if n_shuffles and labels.min() != labels.max():
        null = float(np.percentile(permutation_null(probs, labels, n_shuffles, seed=config.seed), 99))
    report = EvalReport(split.name, config.variant, value, len(train_ds), len(test_ds), config.seed,
                        round(time.perf_counter() - t0, 3) if timing else None, net.n_params(), null,
                        descriptor(config), [float(p) for p in probs], [int(v) for v in labels],
                        [s.game_id for s in split.test])
    return report, net


def _dims(ds, config) -> dict:
    if not config.is_mamba:
        return {"n_team_stats": ds.teams.shape[-1]}
    return {"n_team_stats": ds.teams.shape[-1], "n_player_stats": ds.players.shape[-1],
            "n_players": ds.players.shape[2]}


def run_experiment(splits: Sequence[Split], config: ModelConfig, fins: dict | None = None,
                   **kwargs) -> list[EvalReport]:
    return [evaluate_split(s, config, fins, **kwargs)[0] for s in splits]


def run_ablation(splits: Sequence[Split], fins: dict, seed: int, base: ModelConfig | None = None,
                 **kwargs) -> list[EvalReport]:
    """Rows 1-4 on every split, sharing one seed. Reports are ordered split-major."""
    base = base or ModelConfig(seed=seed)
    reports = []
    for split in splits:
        for row in ABLATION_ROWS:
            cfg = replace(base, variant=row, seed=seed, kinds=())
            reports.append(evaluate_split(split, cfg, fins, **kwargs)[0])
    return reports


# ---------------------------------------------------------------- reports

def _fmt_auc(v: float) -> str:
    return "nan" if v != v else f"{v:.2f}"


def report_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([r.dataset, r.variant, r.n_train, r.n_test, repr(float(r.auc)), r.seed,
                    "" if r.wall_s is None else repr(float(r.wall_s))])
    return buf.getvalue()


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["n_train"] = int(row["n_train"])
        row["n_test"] = int(row["n_test"])
        row["auc"] = float(row["auc"])
        row["seed"] = int(row["seed"])
        row["wall_s"] = float(row["wall_s"]) if row["wall_s"] else None
    return rows


def report_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: one row per variant, one AUC column per dataset."""
    datasets = list(dict.fromkeys(r.dataset for r in reports))
    variants = list(dict.fromkeys(r.variant for r in reports))
    cell = {(r.variant, r.dataset): r for r in reports}
    head = ["R", "FS", "FC", "IF", "Layers"] + datasets
    rows = []
    for v in variants:
        first = next(r for r in reports if r.variant == v)
        d = first.descriptor or {"R": v, "FS": "", "FC": "", "IF": "", "Layers": ""}
        rows.append([d["R"], d["FS"], d["FC"], d["IF"], d["Layers"]]
                    + [_fmt_auc(cell[(v, ds)].auc) if (v, ds) in cell else "" for ds in datasets])
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    line = lambda cells: " | ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(head), sep] + [line(r) for r in rows]) + "\n"


def emit_report(reports: Sequence[EvalReport], out_dir, formats=("csv", "json", "txt")) -> list[Path]:
    """Write ``report.csv``, ``report.json`` and ``report.txt``; field order is fixed."""
    if not reports:
        raise ContractError("no reports to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "csv" in formats:
        p = out / "report.csv"
        p.write_text(report_csv(reports))
        paths.append(p)
    if "json" in formats:
        p = out / "report.json"
        p.write_text(json.dumps([asdict(r) for r in reports], indent=2, allow_nan=True) + "\n")
        paths.append(p)
    if "txt" in formats:
        p = out / "report.txt"
        p.write_text(report_table(reports))
        paths.append(p)
    return paths
