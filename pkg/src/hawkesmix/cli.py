"""Command-line interface: ``hawkesmix {simulate,fit,evaluate,benchmark,probe}``.

Exit codes: 0 success, 1 data or model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .augment import METHODS as AUGMENT_METHODS
from .errors import HawkesError
from .evaluation import (
    METHODS,
    assign_clusters,
    benchmark,
    complexity_probe,
    format_table,
    loglog_slope,
    purity,
    test_loglike_detail,
    write_csv,
)
from .io import read_dataset, read_model, write_dataset, write_model
from .learning import AsplConfig, aspl_fit, fit_em, spl_fit
from .presets import PRESETS, get_preset
from .simulate import SimConfig, simulate_mixture


class DataError(Exception):
    """Bad input file or content; maps to exit code 1."""


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in _csv_list(text)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkesmix", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-iteration progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a labeled synthetic dataset")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model JSON file to simulate from")
    src.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--n", type=int, help="number of sequences (preset default if omitted)")
    s.add_argument("--horizon", type=float, help="window length T (preset default if omitted)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a mixture to a dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--strategy", choices=METHODS, required=True)
    f.add_argument("--augment", choices=AUGMENT_METHODS, help="required with --strategy aspl")
    f.add_argument("--k", type=int, default=2)
    f.add_argument("--beta", type=float, default=1.0)
    f.add_argument("--alpha", type=float, default=10.0)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True, help="model JSON output")
    f.add_argument("--report", help="fit report JSON output")
    f.add_argument("--plot", help="convergence figure (aspl/spl only)")

    e = sub.add_parser("evaluate", help="score a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--metric", choices=("loglike", "purity", "both"), default="both")
    e.add_argument("--csv", help="also write the metrics as CSV")

    b = sub.add_parser("benchmark", help="compare methods over random splits")
    bsrc = b.add_mutually_exclusive_group(required=True)
    bsrc.add_argument("--preset", choices=sorted(PRESETS))
    bsrc.add_argument("--data")
    b.add_argument("--trials", type=int, default=15)
    b.add_argument("--methods", default="mle,spl,aspl")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--split", type=float, default=0.5, help="train fraction")
    b.add_argument("--k", type=int, help="components (preset K if omitted, else 2)")
    b.add_argument("--beta", type=float, help="decay (preset beta if omitted, else 1)")
    b.add_argument("--alpha", type=float, default=10.0)
    b.add_argument("--augment", choices=AUGMENT_METHODS, default="superpose")
    b.add_argument("--jobs", type=int, help="worker processes (default: $HAWKESMIX_JOBS or 1)")
    b.add_argument("--out", required=True, help="CSV output")
    b.add_argument("--figures", help="directory for figures and curve data")
    b.add_argument("--no-timing", action="store_true", help="write n/a for mean_seconds (byte-stable CSV)")

    q = sub.add_parser("probe", help="time one ASPL outer iteration against sequence length")
    q.add_argument("--lengths", type=_int_list, default=[32, 64, 128])
    q.add_argument("--k", type=int, default=2)
    q.add_argument("--n", type=int, default=32)
    q.add_argument("--m", type=int, default=20, help="EM iterations per update")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", help="CSV output")
    q.add_argument("--figure")
    return p


def _load_data(path):
    try:
        return read_dataset(path)
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err


def _load_model(path):
    try:
        return read_model(path)
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err


def cmd_simulate(args, parser):
    if args.preset:
        preset = get_preset(args.preset)
        model, n, horizon = preset.model, preset.n_sequences, preset.horizon
    else:
        model, _ = _load_model(args.model)
        n, horizon = None, None
    n = args.n if args.n is not None else n
    horizon = args.horizon if args.horizon is not None else horizon
    if n is None or horizon is None:
        parser.error("--n and --horizon are required with --model")
    if n < 0 or horizon <= 0:
        parser.error("--n must be >= 0 and --horizon > 0")
    if n == 0:
        Path(args.out).write_text("")
        return 0
    ds = simulate_mixture(SimConfig(model, n, horizon, args.seed))
    write_dataset(args.out, ds.sequences, ds.labels)
    print(f"wrote {n} sequences to {args.out}")
    return 0


def cmd_fit(args, parser):
    if (args.strategy == "aspl") != (args.augment is not None):
        parser.error("--augment is required with --strategy aspl and not allowed otherwise")
    seqs, _ = _load_data(args.data)
    if len(seqs) < 2:
        raise DataError(f"{args.data}: need at least two sequences")
    cfg = AsplConfig(K=args.k, beta=args.beta, alpha=args.alpha, seed=args.seed,
                     augment_method=args.augment or "superpose")
    meta = {"seed": args.seed, "strategy": args.strategy, "config": asdict(cfg)}
    if args.strategy == "mle":
        res = fit_em(seqs, args.k, args.beta, seed=args.seed)
        model, report = res.model, {
            "strategy": "mle", "n_iter": res.n_iter, "converged": res.converged,
            "objective": res.objective,
            "warnings": [] if res.converged else ["EM stopped at the iteration cap"],
        }
        rep_obj = None
    else:
        fit = aspl_fit if args.strategy == "aspl" else spl_fit
        model, rep_obj = fit(seqs, cfg)
        report = rep_obj.to_dict()
    write_model(args.out, model, meta)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    if args.plot and rep_obj is not None:
        from .plotting import plot_convergence

        plot_convergence(rep_obj, args.plot)
    if not report["converged"]:
        print("warning: " + "; ".join(report["warnings"]), file=sys.stderr)
    print(f"wrote {args.strategy} model (K={model.K}) to {args.out}")
    return 0


def cmd_evaluate(args, parser):
    model, _ = _load_model(args.model)
    seqs, labels = _load_data(args.data)
    if seqs and seqs[0].n_types != model.n_types:
        raise DataError(f"data has {seqs[0].n_types} event types, model has {model.n_types}")
    rows = []
    if args.metric in ("loglike", "both"):
        value, skipped = test_loglike_detail(model, seqs)
        rows.append(("loglike", value))
        if skipped:
            rows.append(("skipped_empty", skipped))
    if args.metric in ("purity", "both"):
        if labels is None:
            raise DataError(f"{args.data} has no labels; purity is unavailable")
        rows.append(("purity", purity(assign_clusters(model, seqs), labels)))
    for name, value in rows:
        print(f"{name}\t{value}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            w.writerows(rows)
    return 0


def cmd_benchmark(args, parser):
    methods = _csv_list(args.methods)
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        parser.error(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.preset:
        preset = get_preset(args.preset)
        K = args.k or preset.model.K
        beta = args.beta or preset.model.beta
        kw = {"sim": preset.sim_config()}
    else:
        seqs, labels = _load_data(args.data)
        K, beta = args.k or 2, args.beta or 1.0
        kw = {"data": (seqs, labels)}
    cfg = AsplConfig(K=K, beta=beta, alpha=args.alpha, augment_method=args.augment)
    result = benchmark(args.trials, methods=methods, train_fraction=args.split, seed=args.seed,
                       config=cfg, n_jobs=args.jobs, **kw)
    write_csv(result, args.out, timing=not args.no_timing)
    print(format_table(result, timing=not args.no_timing))
    if args.figures:
        from .plotting import plot_benchmark, plot_convergence, write_curve_dat

        out = Path(args.figures)
        out.mkdir(parents=True, exist_ok=True)
        plot_benchmark(result, out / "loglike.png")
        for t in result.trials:
            if t.report is not None and t.trial == 0:
                write_curve_dat(t.report, out / f"curve_{t.method}.dat")
                plot_convergence(t.report, out / f"curve_{t.method}.png")
    return 0


def cmd_probe(args, parser):
    if len(args.lengths) < 3:
        parser.error("--lengths needs at least three values")
    rows = complexity_probe(args.lengths, K=args.k, N=args.n, M=args.m, seed=args.seed)
    for r in rows:
        print(f"I={r.I}\tK={r.K}\tN={r.N}\tseconds={r.seconds:.4f}")
    print(f"log-log slope {loglog_slope([r.I for r in rows], [r.seconds for r in rows]):.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["I", "K", "N", "M", "seconds"])
            w.writerows([[r.I, r.K, r.N, r.M, repr(r.seconds)] for r in rows])
    if args.figure:
        from .plotting import plot_complexity

        plot_complexity(rows, args.figure)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "probe": cmd_probe,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (DataError, HawkesError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
