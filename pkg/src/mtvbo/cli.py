"""Command-line front door: benchmarks plus a persisted ask-tell loop.

Exit codes: 0 success, 2 usage or state errors (pending batch, bad counts,
unknown ids), 3 malformed session file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .acquisition import MtvConfig, design_batch
from .gp import Dataset, FitConfig, GpPosterior, KernelParams, fit_hyperparams
from .harness import (METHOD_TOKENS, parse_method, run_bench,
                      valid_problem_names, write_report_csv, write_results_csv)
from .pstar import PStarConfig
from .session import MalformedSessionError, Session

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MALFORMED = 3


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _parse_bounds(text: str) -> list[list[float]]:
    bounds = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        bounds.append([float(lo), float(hi)])
    return bounds


def _print_batch(arms: np.ndarray) -> None:
    d = arms.shape[1]
    header = "arm " + " ".join(f"{f'x{i + 1}':>14}" for i in range(d))
    print(header)
    for i, arm in enumerate(arms):
        print(f"{i + 1:>3} " + " ".join(f"{v:>14.6g}" for v in arm))


def cmd_new(args) -> int:
    import os

    if os.path.exists(args.session) and not args.force:
        return _fail(f"{args.session} already exists (use --force to replace)")
    try:
        bounds = _parse_bounds(args.bounds)
    except ValueError:
        return _fail(f"cannot parse bounds {args.bounds!r}; expected lo:hi,lo:hi,...")
    session = Session(bounds=bounds, batch_size=args.batch)
    session.store_rng(np.random.default_rng(args.seed))
    session.save(args.session)
    print(f"created {args.session}: {session.dimension} dimensions, "
          f"batch size {session.batch_size}")
    return EXIT_OK


def _session_gp(session: Session):
    """Surrogate from the stored observations; None when there are none."""
    n = len(session.observations_y)
    if n == 0:
        return None
    x = session.to_unit(session.observations_x)
    y = session.observations_y
    if n < 2:
        params = KernelParams(np.full(session.dimension, 0.5), 1.0,
                              float(np.mean(y)), noise_variance=1e-6)
    else:
        params = fit_hyperparams(Dataset(x, y, None), FitConfig())
    session.kernel = params
    return GpPosterior(Dataset(x, y, None), params)


def cmd_suggest(args) -> int:
    try:
        session = Session.load(args.session)
    except MalformedSessionError as exc:
        return _fail(str(exc), EXIT_MALFORMED)
    if session.pending_batch is not None and not args.force:
        return _fail("a pending batch exists; measure it and `tell`, "
                     "or re-run with --force to replace it")
    cfg = session.config
    rng = session.rng()
    gp = _session_gp(session)
    batch = design_batch(
        gp,
        MtvConfig(batch_size=session.batch_size,
                  n_restarts=int(cfg["n_restarts"]),
                  max_opt_iters=int(cfg["max_opt_iters"])),
        PStarConfig(n_samples=cfg["pstar_samples"],
                    n_iterations=int(cfg["pstar_iterations"]),
                    step_scale=float(cfg["pstar_step_scale"])),
        rng,
        dimension=session.dimension,
    )
    arms = session.from_unit(batch.arms)
    session.pending_batch = arms
    session.store_rng(rng)
    session.save(args.session)
    _print_batch(arms)
    return EXIT_OK


def cmd_tell(args) -> int:
    try:
        session = Session.load(args.session)
    except MalformedSessionError as exc:
        return _fail(str(exc), EXIT_MALFORMED)
    if session.pending_batch is None:
        return _fail("no pending batch; run `suggest` first")
    if len(args.values) != session.batch_size:
        return _fail(f"expected {session.batch_size} values "
                     f"(one per arm, in printed order), got {len(args.values)}")
    session.observations_x = np.vstack([session.observations_x,
                                        session.pending_batch])
    session.observations_y = np.concatenate([session.observations_y,
                                             np.asarray(args.values)])
    session.pending_batch = None
    session.save(args.session)
    print(f"recorded {len(args.values)} observations "
          f"({len(session.observations_y)} total)")
    return EXIT_OK


def cmd_bench(args) -> int:
    problems = args.function.split(",")
    valid = valid_problem_names()
    for p in problems:
        if p not in valid:
            return _fail(f"unknown function {p!r}; valid: {', '.join(valid)}")
    specs = args.methods.split(",")
    try:
        for spec in specs:
            parse_method(spec, args.rounds)
    except ValueError as exc:
        return _fail(f"{exc}; valid methods: {', '.join(sorted(METHOD_TOKENS))}")
    progress = None
    if args.verbose:
        progress = lambda prob, mid, rep: print(
            f"  done {prob} {mid} rep {rep}", file=sys.stderr)
    rows, report = run_bench(problems, args.dim, specs, args.rounds,
                             args.batch, args.reps, args.seed,
                             noise_sd=args.noise_sd, episodes=args.episodes,
                             progress=progress)
    write_results_csv(args.results, rows)
    write_report_csv(args.report, report)
    print(f"{'method':>14} {'round':>5} {'mean':>8} {'stderr':>8} {'n':>5}")
    for r in report:
        print(f"{r.method:>14} {r.round:>5} {r.mean_normalized:>8.4f} "
              f"{r.stderr:>8.4f} {r.n:>5}")
    print(f"wrote {args.results} and {args.report}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtvbo",
        description="Batch Bayesian optimization with minimal-terminal-variance designs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_new = sub.add_parser("new", help="create a session file from bounds")
    p_new.add_argument("session")
    p_new.add_argument("--bounds", required=True,
                       help="comma-separated lo:hi pairs, one per dimension")
    p_new.add_argument("--batch", type=int, required=True)
    p_new.add_argument("--seed", type=int, default=0)
    p_new.add_argument("--force", action="store_true")
    p_new.set_defaults(func=cmd_new)

    p_suggest = sub.add_parser("suggest", help="design the next batch")
    p_suggest.add_argument("session")
    p_suggest.add_argument("--force", action="store_true",
                           help="replace an existing pending batch")
    p_suggest.set_defaults(func=cmd_suggest)

    p_tell = sub.add_parser("tell", help="record measurements of the pending batch")
    p_tell.add_argument("session")
    p_tell.add_argument("values", type=float, nargs="+",
                        help="measured values, one per arm, in printed order")
    p_tell.set_defaults(func=cmd_tell)

    p_bench = sub.add_parser("bench", help="run benchmark comparisons")
    p_bench.add_argument("--function", required=True,
                         help="comma-separated problem names (see --list)")
    p_bench.add_argument("--dim", type=int, default=3)
    p_bench.add_argument("--methods", required=True,
                         help="comma-separated; per-round ensembles with ':' "
                              "(e.g. mtv:ts:ts)")
    p_bench.add_argument("--rounds", type=int, default=3)
    p_bench.add_argument("--batch", type=int, default=8)
    p_bench.add_argument("--reps", type=int, default=30)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--noise-sd", type=float, default=0.0)
    p_bench.add_argument("--episodes", type=int, default=30,
                         help="episodes averaged per mountain-car measurement")
    p_bench.add_argument("--results", default="results.csv")
    p_bench.add_argument("--report", default="report.csv")
    p_bench.add_argument("--verbose", action="store_true")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
