"""Multi-round, multi-method, multi-replication benchmark orchestration.

A run is a fixed number of rounds; each round designs a batch with the
configured method, measures every arm, and refits the surrogate on all data
so far.  Scores are the running maximum of measured values.  Results for
one problem are range-normalized across every method, round, and
replication before aggregation.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass

import numpy as np

from .acquisition import Batch, MtvConfig, design_batch
from .baselines import baseline_batch
from .gp import Dataset, FitConfig, GpPosterior, fit_hyperparams
from .mountain_car import evaluate_controller
from .pstar import PStarConfig
from .sobol import SobolStream
from .testbed import FUNCTIONS, Problem, measure, random_problem

BASELINE_TOKENS = {"random", "sobol", "thompson", "ts"}
MTV_FLAGS = {
    "mtv": {},
    "mtv_no_pstar": {"use_pstar_weights": False},
    "mtv_no_opt": {"optimize": False},
    "mtv_no_ic": {"seed_from_pstar": False},
}
METHOD_TOKENS = BASELINE_TOKENS | set(MTV_FLAGS)

RESULTS_HEADER = ["method", "problem", "dimension", "replication", "round",
                  "raw_best", "normalized_best"]
REPORT_HEADER = ["method", "round", "mean_normalized", "stderr", "n"]


class HarnessError(RuntimeError):
    """A designer or measurement failure that aborted a replication."""


def parse_method(spec: str, rounds: int) -> list[str]:
    """Split a method spec like ``mtv`` or ``mtv:ts:ts`` into round tokens."""
    tokens = spec.split(":")
    if len(tokens) == 1:
        tokens = tokens * rounds
    if len(tokens) != rounds:
        raise ValueError(
            f"method {spec!r} lists {len(tokens)} rounds, expected {rounds}")
    for t in tokens:
        if t not in METHOD_TOKENS:
            raise ValueError(
                f"unknown method {t!r}; valid: {sorted(METHOD_TOKENS)}")
    return tokens


def method_id(tokens: list[str]) -> str:
    """Stable display name: unique tokens joined in order of appearance."""
    seen: list[str] = []
    for t in tokens:
        if t not in seen:
            seen.append(t)
    return "+".join(seen)


@dataclass
class RunConfig:
    batch_size: int
    method_per_round: list[str]
    rounds: int = 3
    replications: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if self.rounds < 1 or self.batch_size < 1 or self.replications < 1:
            raise ValueError("rounds, batch_size, replications must be >= 1")
        if len(self.method_per_round) != self.rounds:
            raise ValueError("method_per_round must list one method per round")


@dataclass
class RunTrace:
    batches: list[Batch]
    measurements: np.ndarray  # (rounds, batch_size)
    best_so_far: np.ndarray  # (rounds,)


class ProblemTask:
    """Adapter putting a test-function problem behind the harness interface."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.name = problem.function_name
        self.dimension = problem.dimension
        # known noise level; zero means the surrogate interpolates
        self.noise_variance = problem.noise_sd**2

    def measure(self, x: np.ndarray, rng: np.random.Generator) -> float:
        return measure(self.problem, x, rng)


class MountainCarTask:
    """Episodic simulator objective; noise level unknown, so it is fitted."""

    name = "mountain_car"
    dimension = 3
    noise_variance = None

    def __init__(self, episodes: int = 30):
        self.episodes = episodes

    def measure(self, x: np.ndarray, rng: np.random.Generator) -> float:
        return evaluate_controller(x, self.episodes, rng)


def _design(token: str, gp: GpPosterior | None, round_index: int,
            dimension: int, batch_size: int, rng: np.random.Generator,
            stream: SobolStream) -> Batch:
    if token in BASELINE_TOKENS:
        kind = "thompson" if token == "ts" else token
        return baseline_batch(kind, gp, batch_size, dimension, rng,
                              sobol_stream=stream, round_index=round_index)
    cfg = MtvConfig(batch_size=batch_size, **MTV_FLAGS[token])
    return design_batch(gp, cfg, PStarConfig(), rng,
                        dimension=dimension, round_index=round_index)


def run_one(task, config: RunConfig, seed: int) -> RunTrace:
    """One replication: design, measure, refit, repeat; returns the trace."""
    rng = np.random.default_rng([seed, 2, zlib.crc32(
        method_id(config.method_per_round).encode())])
    stream = SobolStream(task.dimension,
                         scramble_seed=int(rng.integers(2**62)))
    xs: list[np.ndarray] = []
    ys: list[float] = []
    gp: GpPosterior | None = None
    batches: list[Batch] = []
    per_round = np.empty((config.rounds, config.batch_size))
    for r in range(config.rounds):
        token = config.method_per_round[r]
        try:
            batch = _design(token, gp, r, task.dimension, config.batch_size,
                            rng, stream)
        except Exception as exc:
            raise HarnessError(
                f"designer {token!r} failed at round {r} (seed {seed}): {exc}"
            ) from exc
        batches.append(batch)
        for a, arm in enumerate(batch.arms):
            per_round[r, a] = task.measure(arm, rng)
            xs.append(arm)
        ys.extend(per_round[r])
        if r + 1 < config.rounds:
            dataset = Dataset(np.array(xs), np.array(ys), task.noise_variance)
            params = fit_hyperparams(dataset, FitConfig())
            gp = GpPosterior(dataset, params)
    best = np.maximum.accumulate(per_round.max(axis=1))
    return RunTrace(batches, per_round, best)


def range_normalize(traces_by_method: dict[str, list[RunTrace]]) -> dict[str, np.ndarray]:
    """Normalize one problem's best-so-far values to the pooled [0, 1] range.

    The pool covers all methods, rounds, and replications given; a
    degenerate pool (all values equal) maps everything to 0.5.
    """
    stacked = {m: np.array([t.best_so_far for t in traces])
               for m, traces in traces_by_method.items()}
    allv = np.concatenate([v.ravel() for v in stacked.values()])
    lo, hi = float(allv.min()), float(allv.max())
    if hi == lo:
        return {m: np.full_like(v, 0.5) for m, v in stacked.items()}
    return {m: (v - lo) / (hi - lo) for m, v in stacked.items()}


@dataclass(frozen=True)
class ResultRow:
    method: str
    problem: str
    dimension: int
    replication: int
    round: int
    raw_best: float
    normalized_best: float


@dataclass(frozen=True)
class ReportRow:
    method: str
    round: int
    mean_normalized: float
    stderr: float
    n: int


def aggregate(rows: list[ResultRow]) -> list[ReportRow]:
    """Per (method, round) mean and standard error of the normalized score,
    methods ordered by final-round mean, best first."""
    rounds = 1 + max(r.round for r in rows)
    methods = sorted({r.method for r in rows})
    cells: dict[tuple[str, int], list[float]] = {}
    for row in rows:
        cells.setdefault((row.method, row.round), []).append(row.normalized_best)
    final_mean = {m: float(np.mean(cells[(m, rounds - 1)])) for m in methods}
    methods.sort(key=lambda m: (-final_mean[m], m))
    out = []
    for m in methods:
        for r in range(rounds):
            vals = np.array(cells[(m, r)])
            err = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            out.append(ReportRow(m, r, float(np.mean(vals)), err, len(vals)))
    return out


def run_bench(problems: list[str], dimension: int, method_specs: list[str],
              rounds: int, batch_size: int, replications: int, base_seed: int,
              noise_sd: float = 0.0, episodes: int = 30,
              progress=None) -> tuple[list[ResultRow], list[ReportRow]]:
    """Run the full grid and return (per-trace rows, aggregated report).

    ``problems`` are test-function names and/or ``mountain_car``.  Every
    method sees the same problem instance per replication; replication r
    uses seed ``base_seed + r``.
    """
    methods = {spec: parse_method(spec, rounds) for spec in method_specs}
    ids = [method_id(t) for t in methods.values()]
    if len(set(ids)) != len(ids):
        raise ValueError("method specs collapse to duplicate ids")
    rows: list[ResultRow] = []
    for problem_name in problems:
        traces: dict[str, list[RunTrace]] = {}
        tasks = []
        for rep in range(replications):
            rep_seed = base_seed + rep
            if problem_name == "mountain_car":
                tasks.append(MountainCarTask(episodes))
            else:
                prng = np.random.default_rng([rep_seed, 1])
                tasks.append(ProblemTask(
                    random_problem(problem_name, dimension, prng, noise_sd)))
        for spec, tokens in methods.items():
            mid = method_id(tokens)
            config = RunConfig(batch_size, tokens, rounds, replications, base_seed)
            traces[mid] = []
            for rep in range(replications):
                traces[mid].append(run_one(tasks[rep], config, base_seed + rep))
                if progress:
                    progress(problem_name, mid, rep)
        normalized = range_normalize(traces)
        dim = tasks[0].dimension
        for mid, traces_m in traces.items():
            norm = normalized[mid]
            for rep, trace in enumerate(traces_m):
                for r in range(rounds):
                    rows.append(ResultRow(mid, problem_name, dim, rep, r,
                                          float(trace.best_so_far[r]),
                                          float(norm[rep, r])))
    return rows, aggregate(rows)


def valid_problem_names() -> list[str]:
    return sorted(FUNCTIONS) + ["mountain_car"]


def write_results_csv(path: str, rows: list[ResultRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for r in rows:
            writer.writerow([r.method, r.problem, r.dimension, r.replication,
                             r.round, repr(r.raw_best), repr(r.normalized_best)])


def write_report_csv(path: str, rows: list[ReportRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in rows:
            writer.writerow([r.method, r.round, repr(r.mean_normalized),
                             repr(r.stderr), r.n])
