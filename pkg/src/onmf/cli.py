"""``onmf`` command line: cluster, eval, synth, bench.

Exit codes: 0 success, 1 data error (unreadable or inconsistent input),
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as onmf_io
from .bench import (
    ExperimentConfig,
    SyntheticSpec,
    generate,
    load_manifest,
    parse_init,
    run_experiment,
    summarize,
    weighted_average,
)
from .init import init_w
from .metrics import clustering_accuracy, matched_mrsa
from .solver import run_onmf
from .types import SolverConfig

log = logging.getLogger("onmf")


class DataError(Exception):
    pass


def _solver_flags(p):
    p.add_argument("--divergence", choices=["fro", "kl"], default="kl")
    p.add_argument("--maxiter", type=int, default=100)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--init", default="greedy", help="greedy | random | indices:i1,i2,...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onmf", description="Orthogonal NMF clustering (Frobenius / KL).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="factorize one matrix and write the clustering")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="MatrixMarket data matrix (columns are data points)")
    src.add_argument("--input-hsi", help="hyperspectral cube header")
    p.add_argument("--rank", type=int, required=True)
    _solver_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=".")

    p = sub.add_parser("eval", help="score labels or centroids against ground truth")
    p.add_argument("--input", required=True, help="predicted labels, or estimated W (MatrixMarket)")
    truth = p.add_mutually_exclusive_group(required=True)
    truth.add_argument("--truth-labels")
    truth.add_argument("--truth-w")

    p = sub.add_parser("synth", help="write a planted-cluster dataset")
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--law", choices=["dirichlet", "disjoint"], default="dirichlet")
    p.add_argument("--noise", choices=["none", "poisson", "gaussian"], default="none")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--small-norm", type=float, default=None)
    p.add_argument("--scale-low", type=float, default=5.0)
    p.add_argument("--scale-high", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("bench", help="run a manifest of datasets x configs x seeds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--repeats", type=int, default=None, help="overrides the manifest value")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _validate(parser, args):
    if args.command == "cluster":
        if args.rank < 1:
            parser.error("--rank must be >= 1")
        if args.maxiter < 1:
            parser.error("--maxiter must be >= 1")
        if not (args.delta > 0 and args.epsilon > 0):
            parser.error("--delta and --epsilon must be > 0")
        try:
            parse_init(args.init)
        except ValueError as exc:
            parser.error(str(exc))
    elif args.command == "synth":
        try:
            _synth_spec(args)
        except ValueError as exc:
            parser.error(str(exc))
    elif args.command == "bench" and args.repeats is not None and args.repeats < 1:
        parser.error("--repeats must be >= 1")


def _synth_spec(args) -> SyntheticSpec:
    return SyntheticSpec(
        m=args.m, n=args.n, r=args.rank, law=args.law, scale=(args.scale_low, args.scale_high),
        noise=args.noise, sigma=args.sigma, small_norm=args.small_norm, seed=args.seed,
    )


def cmd_cluster(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cube = None
    try:
        if args.input_hsi:
            cube = onmf_io.read_hsi_cube(args.input_hsi)
            x = cube.matrix()
        else:
            x = onmf_io.read_matrix_market(args.input)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read input: {exc}") from exc

    method, idx = parse_init(args.init)
    config = SolverConfig(args.divergence, args.rank, args.maxiter, args.delta, args.epsilon, args.seed)
    try:
        w0, sel = init_w(x, args.rank, method, seed=args.seed, indices=idx)
        w, h, rep = run_onmf(x, w0, config)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    log.info("init columns %s", list(sel.indices))

    onmf_io.write_labels(out / "labels.txt", h.assignment)
    onmf_io.write_dense_matrix_market(out / "w.mtx", w)
    onmf_io.write_trace_csv(out / "trace.csv", rep.objective, rep.h_change)
    if cube is not None:
        if args.rank <= len(onmf_io.PALETTE):
            onmf_io.write_cluster_map(out / "clusters.ppm", h, cube.width, cube.height)
        else:
            log.warning("rank %d exceeds the palette; no cluster map written", args.rank)
        from .plotting import plot_centroids

        plot_centroids(w, out / "centroids.png", cube.wavelengths, title=f"{args.divergence} centroids")
    print(f"iters={rep.iterations} time_s={rep.wall_time:.6f} objective={rep.final_objective!r}")
    return 0


def cmd_eval(args) -> int:
    try:
        if args.truth_labels:
            pred = onmf_io.read_labels(args.input)
            truth = onmf_io.read_labels(args.truth_labels)
            acc = clustering_accuracy(truth, pred)
            print(f"accuracy={acc!r}")
        else:
            w_est = onmf_io.read_dense_matrix_market(args.input)
            w_true = onmf_io.read_dense_matrix_market(args.truth_w)
            score, perm = matched_mrsa(w_est, w_true)
            print(f"mrsa={score!r} perm={','.join(str(int(p)) for p in perm)}")
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    return 0


def cmd_synth(args) -> int:
    spec = _synth_spec(args)
    x, labels, w_true = generate(spec)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    onmf_io.write_matrix_market(out / "X.mtx", x)
    onmf_io.write_labels(out / "labels.txt", labels)
    onmf_io.write_dense_matrix_market(out / "w_true.mtx", w_true)
    doc = asdict(spec)
    doc["law"], doc["noise"] = spec.law.value, spec.noise.value
    (out / "spec.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {spec.m}x{spec.n} matrix, r={spec.r}, nnz={x.nnz} to {out}")
    return 0


SUMMARY_HEADER = ["dataset", "algorithm", "n", "r", "runs", "failures", "metric_name",
                  "metric_mean", "metric_first", "mean_time_s", "mean_iterations"]


def cmd_bench(args) -> int:
    try:
        loaders, configs, repeats = load_manifest(args.manifest)
    except (OSError, ValueError, TypeError) as exc:
        raise DataError(f"bad manifest: {exc}") from exc
    if args.repeats is not None:
        repeats = args.repeats
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports = run_experiment(loaders, configs, repeats)
    onmf_io.write_report_csv(out / "report.csv", reports)
    summaries = summarize(reports)
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([getattr(s, k) for k in SUMMARY_HEADER])

    for s in summaries:
        print(f"{s.dataset} {s.algorithm} n={s.n} r={s.r} {s.metric_name or 'metric'}={s.metric_mean:.4f} "
              f"time_s={s.mean_time_s:.4f} iters={s.mean_iterations:.1f} failures={s.failures}")
    for alg in dict.fromkeys(s.algorithm for s in summaries):
        print(f"weighted_average[{alg}]={weighted_average(summaries, alg)!r}")

    if not args.no_figures:
        from .plotting import plot_summary, plot_traces

        plot_traces(reports, out / "traces.png")
        plot_summary(summaries, out / "summary.png")
    failed = sum(r.failed for r in reports)
    if failed:
        log.warning("%d of %d runs failed", failed, len(reports))
    return 0


COMMANDS = {"cluster": cmd_cluster, "eval": cmd_eval, "synth": cmd_synth, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
