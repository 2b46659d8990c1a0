"""Batch Bayesian optimization with minimal-terminal-variance batch design."""

from .acquisition import Batch, MtvConfig, design_batch, initial_batch, mtv_value
from .baselines import BaselineKind, baseline_batch
from .gp import (Dataset, FitConfig, GpPosterior, IllConditionedError,
                 KernelParams, fit_hyperparams)
from .harness import (MountainCarTask, ProblemTask, RunConfig, RunTrace,
                      aggregate, range_normalize, run_bench, run_one)
from .pstar import (PStarConfig, SampleSet, StepProposal, argmax_mean,
                    hit_and_run_step, sample_pstar, truncated_normal)
from .session import MalformedSessionError, Session
from .sobol import SobolStream, sobol_points
from .testbed import Problem, distort, evaluate, measure, random_problem

__version__ = "0.1.0"

__all__ = [
    "Batch", "BaselineKind", "Dataset", "FitConfig", "GpPosterior",
    "IllConditionedError", "KernelParams", "MalformedSessionError",
    "MountainCarTask", "MtvConfig", "PStarConfig", "Problem", "ProblemTask",
    "RunConfig", "RunTrace", "SampleSet", "Session", "SobolStream",
    "StepProposal", "aggregate", "argmax_mean", "baseline_batch",
    "design_batch", "distort", "evaluate", "fit_hyperparams",
    "hit_and_run_step", "initial_batch", "measure", "mtv_value",
    "random_problem", "range_normalize", "run_bench", "run_one",
    "sample_pstar", "sobol_points", "truncated_normal",
]
