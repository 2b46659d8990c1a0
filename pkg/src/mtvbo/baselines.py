"""Comparison batch designers: uniform random, Sobol', batch Thompson."""

from __future__ import annotations

import enum

import numpy as np

from .acquisition import Batch
from .gp import GpPosterior
from .sobol import SobolStream, sobol_points

TS_CANDIDATES = 512


class BaselineKind(enum.Enum):
    RANDOM = "random"
    SOBOL = "sobol"
    THOMPSON = "thompson"


def baseline_batch(kind: BaselineKind | str, gp: GpPosterior | None,
                   batch_size: int, dimension: int,
                   rng: np.random.Generator,
                   sobol_stream: SobolStream | None = None,
                   round_index: int = 0) -> Batch:
    """Design a batch with one of the baseline strategies.

    ``sobol_stream`` carries the run-level low-discrepancy state so that
    consecutive rounds continue the same sequence; when omitted, a fresh
    scrambled stream is seeded from ``rng``.  Thompson sampling with no
    surrogate falls back to the Sobol' behavior (quasi-random round zero).
    """
    kind = BaselineKind(kind)
    if kind is BaselineKind.RANDOM:
        return Batch(rng.random((batch_size, dimension)), round_index)

    if kind is BaselineKind.SOBOL or gp is None:
        if sobol_stream is None:
            sobol_stream = SobolStream(dimension,
                                       scramble_seed=int(rng.integers(2**62)))
        return Batch(sobol_points(sobol_stream, batch_size), round_index)

    arms = np.empty((batch_size, dimension))
    for a in range(batch_size):
        cand_stream = SobolStream(dimension,
                                  scramble_seed=int(rng.integers(2**62)))
        candidates = sobol_points(cand_stream, TS_CANDIDATES)
        draw = gp.joint_sample(candidates, rng)
        arms[a] = candidates[int(np.argmax(draw))]
    return Batch(arms, round_index)
