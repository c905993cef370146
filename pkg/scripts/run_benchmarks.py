"""Desk-scale comparison of the benchmark datasets.

Trains K autoencoders per dataset (low-correlation and moderately-high
correlation synthetic benchmarks, optionally the UCI wine data) and prints
the stability summaries side by side.

    python scripts/run_benchmarks.py --realizations 30 --epochs 2000 \\
        --samples 300 --wine data/wine.csv --out runs/desk
"""

import argparse
import logging
import time
from pathlib import Path

from latentstab.autoenc import NetworkConfig
from latentstab.dataspace import SyntheticSpec, generate_synthetic, load_csv, standardize
from latentstab.pipeline import cached_ensemble
from latentstab.report import ReportOptions, build_report, emit


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--realizations", type=int, default=30)
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--wine", help="path to the wine CSV (class column 'class')")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    datasets = {
        "low": generate_synthetic(SyntheticSpec.low_correlation(args.samples, args.data_seed)),
        "high": generate_synthetic(SyntheticSpec.high_correlation(args.samples, args.data_seed)),
    }
    if args.wine:
        datasets["wine"] = standardize(load_csv(args.wine))[0]

    out = Path(args.out)
    rows = []
    for name, ds in datasets.items():
        t0 = time.perf_counter()
        cfg = NetworkConfig(ds.n_features, epochs=args.epochs)
        ens = cached_ensemble(
            ds, cfg, args.realizations, args.seed, out / "cache", workers=args.workers,
            progress=lambda d, t: logging.info("%s: %d/%d", name, d, t),
        )
        rep = build_report(ds, ens, ReportOptions())
        emit(rep, out / name)
        rows.append((name, rep, time.perf_counter() - t0))

    print(f"{'dataset':8} {'stress':>7} {'jaccard':>8} {'eta50':>7} {'eps50':>7} {'dMVEE50':>8} {'dglob50':>8} {'dloc50':>8}  classes")
    for name, rep, secs in rows:
        print(
            f"{name:8} {rep.stress.mode:7.3f} {rep.jaccard.mode:8.3f} {rep.eta.summary.p50:7.2f} "
            f"{rep.epsilon.summary.p50:7.2f} {rep.delta_mvee.summary.p50:8.2f} {rep.delta_global.summary.p50:8.2f} "
            f"{rep.delta_local.summary.p50:8.2f}  {rep.structural_class}/{rep.inferential_class}  ({secs:.0f}s)"
        )


if __name__ == "__main__":
    main()
