"""Command-line interface.

    latentstab synth    --kind low|high [--config spec.json] --out data.csv
    latentstab train    --data data.csv --out ens/ --realizations K --epochs E
    latentstab evaluate --data data.csv --ensemble ens/ --out report/
    latentstab report   --data data.csv --out run/ --realizations K --epochs E
    latentstab trace    --ensemble ens/ --index 45 --index 890

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .anisotropy import GRID_SIZE, MVEE_TOL
from .autoenc import DESK_EPOCHS, DESK_REALIZATIONS, NetworkConfig, load_ensemble, save_ensemble, train_ensemble
from .dataspace import SyntheticSpec, generate_synthetic, load_csv, standardize, write_csv
from .errors import LatentStabError
from .pipeline import run_pipeline
from .report import ReportOptions, build_report, emit, trace_sample

log = logging.getLogger("latentstab")


def _load_dataset(path):
    ds, _ = standardize(load_csv(path))
    return ds


def _progress(done, total):
    log.info("trained realization %d/%d", done, total)


def _options(args):
    return ReportOptions(
        grid_size=args.grid,
        mvee_tol=args.tol_mvee,
        use_labels=args.labels,
        trace_indices=tuple(args.trace) if args.trace else None,
        workers=args.workers,
    )


def _config(args, ds):
    return NetworkConfig(
        input_dim=ds.n_features,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
    )


def cmd_synth(args):
    if args.config:
        spec = SyntheticSpec.from_json(args.config)
    elif args.kind == "low":
        spec = SyntheticSpec.low_correlation(args.samples, args.seed, class_count=args.classes)
    else:
        spec = SyntheticSpec.high_correlation(args.samples, args.seed, class_count=args.classes)
    ds = generate_synthetic(spec)
    write_csv(ds, args.out)
    print(f"wrote {ds.n_samples}x{ds.n_features} dataset with {ds.class_count} classes to {args.out}")


def cmd_train(args):
    ds = _load_dataset(args.data)
    ens = train_ensemble(_config(args, ds), ds, args.realizations, args.seed, workers=args.workers, progress=_progress)
    save_ensemble(ens, args.out)
    print(f"wrote {ens.K} realizations to {args.out}")


def cmd_evaluate(args):
    ds = _load_dataset(args.data) if args.data else None
    ens = load_ensemble(args.ensemble)
    rep = build_report(ds, ens, _options(args))
    emit(rep, args.out)
    _print_summary(rep, args.out)


def cmd_report(args):
    ds = _load_dataset(args.data)
    out = Path(args.out)
    ens, rep = run_pipeline(
        ds,
        args.realizations,
        args.epochs,
        args.seed,
        _options(args),
        workers=args.workers,
        config=_config(args, ds),
        progress=_progress,
    )
    save_ensemble(ens, out / "ensemble")
    emit(rep, out)
    _print_summary(rep, out)


def cmd_trace(args):
    ens = load_ensemble(args.ensemble)
    for i in args.index:
        t = trace_sample(ens, i)
        print(json.dumps(t.to_dict()))


def _print_summary(rep, out):
    print(f"structural: {rep.structural_class} (adjusted stress mode {rep.stress.mode:.3f})")
    print(f"inferential: {rep.inferential_class} (Jaccard mode {rep.jaccard.mode:.3f})")
    if rep.eta is not None:
        print(f"eta P50: {rep.eta.summary.p50:.2f}%")
    for n in rep.notes:
        print(f"note: {n}")
    print(f"report written to {out}")


def build_parser():
    p = argparse.ArgumentParser(prog="latentstab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def training_flags(sp):
        sp.add_argument("--realizations", type=int, default=DESK_REALIZATIONS)
        sp.add_argument("--epochs", type=int, default=DESK_EPOCHS)
        sp.add_argument("--seed", type=int, default=0, help="base seed; realization k uses seed+k")
        sp.add_argument("--batch-size", type=int, default=16)
        sp.add_argument("--learning-rate", type=float, default=1e-3)

    def metric_flags(sp):
        sp.add_argument("--grid", type=int, default=GRID_SIZE)
        sp.add_argument("--tol-mvee", type=float, default=MVEE_TOL)
        sp.add_argument("--labels", action=argparse.BooleanOptionalAction, default=True)
        sp.add_argument("--trace", type=int, action="append", help="sample index to trace (repeatable)")

    s = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    s.add_argument("--kind", choices=["low", "high"], default="low")
    s.add_argument("--config", help="JSON synthetic spec (overrides --kind)")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--classes", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train an ensemble of autoencoders")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    training_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="stability metrics for an ensemble directory")
    s.add_argument("--data")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    metric_flags(s)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="train and evaluate in one run")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    training_flags(s)
    metric_flags(s)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("trace", help="sample-trace diagnostics")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--index", type=int, action="append", required=True)
    s.set_defaults(func=cmd_trace)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except LatentStabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
