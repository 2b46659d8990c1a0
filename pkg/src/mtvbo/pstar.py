"""Sampling the distribution of the maximizer.

Runs many parallel hit-and-run Metropolis chains on the surrogate: each
chain proposes a truncated-normal move along a random direction, draws one
joint 2-point sample from the GP at (current, proposed), and accepts when
the proposed value comes out higher.  Only final states are kept.  The step
scale adapts to hold the acceptance fraction inside a target band.

With no surrogate yet, the maximizer is taken as uniform and the samples
come from a Sobol' stream instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from .gp import GpPosterior
from .sobol import SobolStream, sobol_points

_BOUNDARY_NUDGE = 1e-9


@dataclass
class PStarConfig:
    """Knobs for the maximizer sampler.

    ``n_samples`` may be left None; batch designers then derive it from the
    batch size.  ``mean_rule`` switches acceptance to the deterministic
    posterior-mean comparison instead of the joint-draw comparison.
    """

    n_samples: int | None = None
    n_iterations: int = 64
    step_scale: float = 0.25
    accept_band: tuple[float, float] = (0.2, 0.5)
    shrink: float = 0.7
    grow: float = 1.3
    mean_rule: bool = False

    def __post_init__(self):
        low, high = self.accept_band
        if not 0.0 < low < high < 1.0:
            raise ValueError("accept_band must satisfy 0 < low < high < 1")
        if not self.shrink < 1.0 < self.grow:
            raise ValueError("need shrink < 1 < grow")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")


@dataclass(frozen=True)
class StepProposal:
    direction: np.ndarray
    lambda_minus: float
    lambda_plus: float
    eta: float


@dataclass(frozen=True)
class SampleSet:
    """Approximate draws from the maximizer distribution."""

    points: np.ndarray
    origin: str  # "mcmc" or "sobol-uniform"

    def __len__(self) -> int:
        return len(self.points)


def truncated_normal(sigma: float, lo: float, hi: float,
                     rng: np.random.Generator) -> float:
    """One draw from N(0, sigma^2) restricted to [lo, hi], via inverse CDF."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    if lo == hi:
        return lo
    p_lo = ndtr(lo / sigma)
    p_hi = ndtr(hi / sigma)
    u = p_lo + rng.random() * (p_hi - p_lo)
    return float(np.clip(sigma * ndtri(u), lo, hi))


def _truncated_normal_batch(sigma, lo, hi, u):
    p_lo = ndtr(lo / sigma)
    p_hi = ndtr(hi / sigma)
    draws = sigma * ndtri(p_lo + u * (p_hi - p_lo))
    return np.clip(draws, lo, hi)


def box_exit_distances(x: np.ndarray, direction: np.ndarray):
    """Distances from x to the unit-box boundary along +direction and
    -direction.  Rows of x pair with rows of direction."""
    x = np.atleast_2d(x)
    direction = np.atleast_2d(direction)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(direction > 0, (1.0 - x) / direction,
                       np.where(direction < 0, -x / direction, np.inf))
        neg = np.where(direction > 0, x / direction,
                       np.where(direction < 0, (x - 1.0) / direction, np.inf))
    return neg.min(axis=1), pos.min(axis=1)


def hit_and_run_step(x: np.ndarray, step_scale: float,
                     rng: np.random.Generator) -> StepProposal:
    """Propose a bounded move: uniform direction, truncated-normal length."""
    x = np.clip(np.asarray(x, dtype=float), _BOUNDARY_NUDGE, 1.0 - _BOUNDARY_NUDGE)
    d = rng.standard_normal(x.shape[0])
    d /= np.linalg.norm(d)
    lam_minus, lam_plus = box_exit_distances(x[None, :], d[None, :])
    eta = truncated_normal(step_scale, -float(lam_minus[0]), float(lam_plus[0]), rng)
    return StepProposal(d, float(lam_minus[0]), float(lam_plus[0]), eta)


def adapt_step_scale(step_scale: float, accept_fraction: float,
                     config: PStarConfig) -> float:
    low, high = config.accept_band
    if accept_fraction < low:
        return step_scale * config.shrink
    if accept_fraction > high:
        return step_scale * config.grow
    return step_scale


def argmax_mean(gp: GpPosterior, n_starts: int = 64) -> np.ndarray:
    """Maximizer of the posterior mean: Sobol' starts plus local polish.

    Runs on the standardized surrogate so optimizer tolerances are
    scale-free; ties resolve to the first-found start.
    """
    gs = gp.standardized()
    d = gp.dimension
    starts = sobol_points(SobolStream(d), n_starts)
    vals = gs.mean(starts)
    order = np.argsort(-vals, kind="stable")
    best_x = starts[order[0]]
    best_val = vals[order[0]]

    def neg_mean(x):
        return -float(gs.mean(x[None, :])[0])

    for idx in order[:3]:
        try:
            res = minimize(neg_mean, starts[idx], method="L-BFGS-B",
                           jac="3-point", bounds=[(0.0, 1.0)] * d,
                           options={"maxiter": 50})
        except Exception:
            continue
        if -res.fun > best_val:
            best_val = -res.fun
            best_x = np.clip(res.x, 0.0, 1.0)
    return best_x


def sample_pstar(gp: GpPosterior | None, config: PStarConfig,
                 rng: np.random.Generator, dimension: int | None = None) -> SampleSet:
    """Draw config.n_samples approximate maximizer locations.

    ``dimension`` is required when gp is None (round zero): the maximizer is
    then uniform by assertion and a scrambled Sobol' set is returned.
    """
    n = config.n_samples
    if n is None or n < 1:
        raise ValueError("config.n_samples must be a positive count")
    if gp is None:
        if dimension is None:
            raise ValueError("dimension is required when gp is None")
        seed = int(rng.integers(2**62))
        stream = SobolStream(dimension, scramble_seed=seed)
        return SampleSet(sobol_points(stream, n), "sobol-uniform")

    gs = gp.standardized()
    d = gp.dimension
    x_star = argmax_mean(gp)
    chains = np.tile(x_star, (n, 1))
    eps = config.step_scale
    for _ in range(config.n_iterations):
        chains = np.clip(chains, _BOUNDARY_NUDGE, 1.0 - _BOUNDARY_NUDGE)
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        lam_minus, lam_plus = box_exit_distances(chains, z)
        u = rng.random(n)
        eta = _truncated_normal_batch(eps, -lam_minus, lam_plus, u)
        proposals = np.clip(chains + eta[:, None] * z, 0.0, 1.0)
        if config.mean_rule:
            accept = gs.mean(proposals) > gs.mean(chains)
        else:
            y_cur, y_new = gs.pair_joint_sample(chains, proposals, rng)
            accept = y_new > y_cur
        chains[accept] = proposals[accept]
        eps = adapt_step_scale(eps, float(np.mean(accept)), config)
    return SampleSet(chains, "mcmc")
