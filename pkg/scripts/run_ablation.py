"""Synthetic league -> ablation rows 1-4 over several seeds, with permutation nulls.

Requires FINs from scripts/pretrain_fins.py (or `mambanet pretrain-fins`).

    python3 scripts/run_ablation.py --fins runs/fins --seeds 0 1 2
"""
import argparse
import statistics
from pathlib import Path

from mambanet import fin as F
from mambanet.evaluation import emit_report, make_splits, run_ablation
from mambanet.ingest import League, build_samples
from mambanet.synth import SynthConfig, generate_league


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fins", default="runs/fins")
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--rounds", type=int, default=4)
    ap.add_argument("--playoff-games", type=int, default=60)
    ap.add_argument("--league-seed", type=int, default=3)
    args = ap.parse_args()

    fins = {k: F.load_fin(Path(args.fins) / f"fin_{k.value}.finc") for k in F.ALL_KINDS}
    league = generate_league(SynthConfig(rounds=args.rounds, playoff_games=args.playoff_games,
                                         seed=args.league_seed))
    samples = build_samples(League(league.games, league.players))
    splits = make_splits({"synth": samples})

    by_row: dict[str, list[float]] = {}
    for seed in args.seeds:
        reports = run_ablation(splits, fins, seed, timing=True)
        emit_report(reports, Path(args.out) / f"seed{seed}")
        for r in reports:
            by_row.setdefault(r.variant, []).append(r.auc)
            print(f"seed {seed} {r.variant:10s} AUC {r.auc:.3f}  null p99 {r.null_p99:.3f}  {r.wall_s:.1f}s")

    for row, aucs in by_row.items():
        spread = statistics.stdev(aucs) if len(aucs) > 1 else 0.0
        print(f"{row:10s} mean AUC {statistics.fmean(aucs):.3f} +/- {spread:.3f} over {len(aucs)} seed(s)")


if __name__ == "__main__":
    main()
