"""Pretrain the four FINs and print held-out R^2 plus a cross-FIN consistency check.

    python3 scripts/pretrain_fins.py --out runs/fins --signals 100000
"""
import argparse
import dataclasses
import time
from pathlib import Path

import numpy as np

from mambanet import fin as F


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/fins")
    ap.add_argument("--signals", type=int, default=F.FINConfig.n_signals)
    ap.add_argument("--seed", type=int, default=F.FINConfig.seed)
    args = ap.parse_args()

    cfg = dataclasses.replace(F.FINConfig(), n_signals=args.signals, seed=args.seed)
    t0 = time.perf_counter()
    fins = F.pretrain_fins(F.ALL_KINDS, cfg)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind, fin in fins.items():
        F.save_fin(fin, out / f"fin_{kind.value}.finc")
        print(f"{kind.value:9s} R^2 {fin.metadata['val_r2']:.5f}  epochs {fin.metadata['epochs']}")

    x, _ = F.generate_signal_array(5000, seed=args.seed + 1)
    var = fins[F.FeatureKind.VARIANCE].predict(x)
    std_sq = fins[F.FeatureKind.STD].predict(x) ** 2
    print(f"corr(variance, std^2) {np.corrcoef(var, std_sq)[0, 1]:.4f}")
    print(f"total {elapsed:.0f}s")


if __name__ == "__main__":
    main()
