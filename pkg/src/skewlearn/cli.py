"""Command-line experiment harness.

Three subcommands tie the library together: `online` streams a file
through a single learner, `distributed` trains over simulated workers
and scores a held-out split, `svdd` fits the one-class detector on a
row prefix. Every output is CSV; repeated runs with the same flags and
inputs are byte-identical (the opt-in timing report is the one
wall-clock exception).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import (
    LibsvmParseError,
    fit_normalizer,
    load_libsvm_file,
    normalize_instances,
    stream_minibatches,
)
from .distributed import (
    cilsd_train,
    dscil_train,
    partition_rows,
    training_time_report,
    write_residual_csv,
)
from .losses import CostPair
from .metrics import (
    ConfusionCounts,
    accuracy,
    gmean,
    mistake_rate,
    sensitivity,
    specificity,
    sum_metric,
    update_confusion,
    write_trace_csv,
)
from .online import make_learner, predict, run_stream
from .solvers import DivergenceError, SolverStallError, lambda_max
from .svdd import svdd_detect, svdd_fit, write_detection_csv

ONLINE_ALGOS = ("pa", "pa1", "pa2", "pagmean", "pagmean1", "pagmean2", "aspgd", "aspgdnoacc")
DISTRIBUTED_ALGOS = ("dscil-lbfgs", "dscil-rcd", "cilsd")

SUMMARY_HEADER = "algo,dataset,accuracy,sensitivity,specificity,gmean,sum,mistake_rate"


def _summary_line(algo: str, dataset: str, counts: ConfusionCounts) -> str:
    return ",".join(
        [
            algo,
            dataset,
            repr(accuracy(counts)),
            repr(sensitivity(counts)),
            repr(specificity(counts)),
            repr(gmean(counts)),
            repr(sum_metric(counts)),
            repr(mistake_rate(counts)),
        ]
    )


def _write_summary(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for line in lines:
            fh.write(line + "\n")


def _parse_costs(text: str) -> CostPair:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("--costs expects two comma-separated values, e.g. 0.3,0.7")
    return CostPair(float(parts[0]), float(parts[1]))


def _parse_grid(text: str) -> list[float]:
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ValueError("--grid expects a comma-separated list of lambda values")
    return values


def cmd_online(args) -> int:
    lam_values = _parse_grid(args.grid) if args.grid else [args.lam]
    summary_lines = []
    for lam in lam_values:
        learner = make_learner(args.algo, lam=lam, C=args.C, eta=args.eta)
        with open(args.data, "rb") as fh:
            stream = (inst for batch in stream_minibatches(fh, args.batch_size) for inst in batch)
            trace, counts = run_stream(learner, stream, trace_every=args.trace_every)
        if counts.total == 0:
            raise ValueError(f"no instances found in {args.data}")
        if not args.grid:
            trace_out = args.trace_out or f"{args.algo}_trace.csv"
            write_trace_csv(trace, trace_out)
        summary_lines.append(_summary_line(args.algo, args.data, counts))
    summary_out = args.summary_out or f"{args.algo}_summary.csv"
    _write_summary(summary_out, summary_lines)
    for line in summary_lines:
        print(line)
    return 0


def _evaluate(w: np.ndarray, instances) -> ConfusionCounts:
    counts = ConfusionCounts()
    for inst in instances:
        counts = update_confusion(counts, inst.label, predict(w, inst.features))
    return counts


def cmd_distributed(args) -> int:
    costs = _parse_costs(args.costs) if args.costs else CostPair.balanced()
    train = load_libsvm_file(args.train)
    test = load_libsvm_file(args.test)
    if not train:
        raise ValueError(f"no training instances in {args.train}")
    stats = fit_normalizer(train)
    train_n = normalize_instances(stats, train)
    test_n = normalize_instances(stats, test)
    num_features = max(stats.num_features, 1)

    lam_values: list[float]
    if args.grid:
        lam_values = _parse_grid(args.grid)
    elif args.lam is not None:
        lam_values = [args.lam]
    else:
        lam = 0.1 * lambda_max(train_n, num_features)
        print(f"lambda = {lam!r} (0.1 * lambda_max)")
        lam_values = [lam]

    summary_lines = []
    for lam in lam_values:
        partitions = partition_rows(
            train_n, args.workers, seed=args.seed if args.shuffle else None
        )
        if args.algo == "cilsd":
            run = cilsd_train(
                partitions,
                lam,
                max_iter=args.max_iter,
                tol=args.tol,
                costs=costs,
                num_features=num_features,
            )
        else:
            subsolver = "lbfgs" if args.algo == "dscil-lbfgs" else "rcd"
            run = dscil_train(
                partitions,
                lam,
                rho_admm=args.rho_admm,
                subsolver=subsolver,
                max_iter=args.max_iter,
                costs=costs,
                num_features=num_features,
                seed=args.seed,
            )
        if not args.grid:
            write_residual_csv(run, args.residual_out or f"{args.algo}_residuals.csv")
            if args.timing_out:
                _write_timing(args.timing_out, run)
        counts = _evaluate(run.weights, test_n)
        if counts.total == 0:
            raise ValueError(f"no test instances in {args.test}")
        summary_lines.append(_summary_line(args.algo, args.test, counts))
    summary_out = args.summary_out or f"{args.algo}_summary.csv"
    _write_summary(summary_out, summary_lines)
    for line in summary_lines:
        print(line)
    return 0


def _write_timing(path, run) -> None:
    report = training_time_report(run)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("worker_id,seconds,iterations\n")
        for row in report.rows:
            fh.write(f"{row.worker_id},{row.seconds!r},{row.iterations}\n")
        fh.write(f"total,{report.total_seconds!r},{report.total_iterations}\n")


def cmd_svdd(args) -> int:
    rows = [inst.features for inst in load_libsvm_file(args.data)]
    if args.train_size < 1:
        raise ValueError("--train-size must be >= 1")
    if args.train_size > len(rows):
        raise ValueError(
            f"--train-size {args.train_size} exceeds the {len(rows)} rows in {args.data}"
        )
    model = svdd_fit(rows[: args.train_size], sigma=args.sigma, delta=args.delta)
    result = svdd_detect(model, rows[args.train_size :])
    out = args.out or "svdd_detections.csv"
    write_detection_csv(result, out)
    print(
        f"flagged {result.flagged_indices.size} of {len(rows) - args.train_size} "
        f"test rows (threshold {model.threshold!r})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewlearn",
        description="Cost-sensitive imbalance learning and anomaly detection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    online = sub.add_parser("online", help="single-pass streaming run")
    online.add_argument("--algo", required=True, choices=ONLINE_ALGOS)
    online.add_argument("--data", required=True)
    online.add_argument("--lambda", dest="lam", type=float, default=0.0)
    online.add_argument("--eta", type=float, default=None, help="fixed step size (default: adaptive)")
    online.add_argument("--C", type=float, default=1.0, help="aggressiveness for clipped variants")
    online.add_argument("--batch-size", type=int, default=256)
    online.add_argument("--trace-every", type=int, default=100)
    online.add_argument("--seed", type=int, default=0)
    online.add_argument("--grid", default=None, help="comma-separated lambda sweep (summary only)")
    online.add_argument("--trace-out", default=None)
    online.add_argument("--summary-out", default=None)
    online.set_defaults(func=cmd_online)

    dist = sub.add_parser("distributed", help="multi-worker batch training")
    dist.add_argument("--algo", required=True, choices=DISTRIBUTED_ALGOS)
    dist.add_argument("--train", required=True)
    dist.add_argument("--test", required=True)
    dist.add_argument("--workers", type=int, default=4)
    dist.add_argument("--lambda", dest="lam", type=float, default=None,
                      help="L1 strength (default: 0.1 * lambda_max)")
    dist.add_argument("--rho-admm", type=float, default=1.0)
    dist.add_argument("--costs", default=None, help="c_pos,c_neg summing to 1 (default 0.5,0.5)")
    dist.add_argument("--max-iter", type=int, default=200)
    dist.add_argument("--tol", type=float, default=1e-6)
    dist.add_argument("--seed", type=int, default=0)
    dist.add_argument("--shuffle", action="store_true",
                      help="shuffle rows with --seed before partitioning")
    dist.add_argument("--grid", default=None, help="comma-separated lambda sweep (summary only)")
    dist.add_argument("--residual-out", default=None)
    dist.add_argument("--summary-out", default=None)
    dist.add_argument("--timing-out", default=None,
                      help="write wall-clock worker timings (not deterministic)")
    dist.set_defaults(func=cmd_distributed)

    svdd = sub.add_parser("svdd", help="one-class detection on a row prefix")
    svdd.add_argument("--data", required=True)
    svdd.add_argument("--train-size", type=int, required=True)
    svdd.add_argument("--sigma", type=float, default=1.0)
    svdd.add_argument("--delta", type=float, default=0.01)
    svdd.add_argument("--seed", type=int, default=0)
    svdd.add_argument("--out", default=None)
    svdd.set_defaults(func=cmd_svdd)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LibsvmParseError, ValueError, OSError, DivergenceError, SolverStallError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
