"""FINDFF and logistic baselines as the number of team stats grows.

    python3 scripts/feature_count_sweep.py --fins runs/fins
"""
import argparse
from pathlib import Path

from mambanet import fin as F
from mambanet.evaluation import make_splits, run_experiment
from mambanet.ingest import League, build_samples
from mambanet.model import ModelConfig
from mambanet.synth import SynthConfig, generate_league

COUNTS = (6, 14, 15, 20, 33)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fins", default="runs/fins")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    fins = {F.FeatureKind.MEAN: F.load_fin(Path(args.fins) / "fin_mean.finc")}
    league = generate_league(SynthConfig(rounds=4, playoff_games=60, seed=3))
    splits = make_splits({"synth": build_samples(League(league.games, league.players))})
    print("stats  logistic  findff")
    for n in COUNTS:
        row = []
        for variant in ("logistic", "findff"):
            cfg = ModelConfig(variant=variant, stats=n, seed=args.seed)
            row.append(run_experiment(splits, cfg, fins if variant == "findff" else None)[0].auc)
        print(f"{n:5d}  {row[0]:8.3f}  {row[1]:6.3f}")


if __name__ == "__main__":
    main()
