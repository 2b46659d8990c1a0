"""Minimal-terminal-variance batch design.

The acquisition value of a candidate batch is the total posterior variance
that would remain at the maximizer-distributed nodes after measuring the
batch; it depends on arm locations only, never on outcomes.  Batches are
designed by joint bounded quasi-Newton minimization over all arm
coordinates, restarted from spread-out node subsets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .gp import GpPosterior, matern52
from .pstar import PStarConfig, SampleSet, sample_pstar
from .sobol import SobolStream, sobol_points

_FD_STEP = 1e-6  # central-difference step in unit-box coordinates
_DUP_TOL = 1e-9
_DUP_NUDGE = 1e-6


@dataclass(frozen=True)
class Batch:
    """B arms proposed for simultaneous measurement."""

    arms: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        object.__setattr__(self, "arms", arms)
        if arms.shape[0] < 1:
            raise ValueError("a batch needs at least one arm")
        if arms.min() < -1e-9 or arms.max() > 1 + 1e-9:
            raise ValueError("arms must lie in the unit box")
        if self.round_index < 0:
            raise ValueError("round_index must be >= 0")

    def __len__(self) -> int:
        return len(self.arms)


@dataclass
class MtvConfig:
    batch_size: int
    n_restarts: int = 8
    max_opt_iters: int = 100
    use_pstar_weights: bool = True
    optimize: bool = True
    seed_from_pstar: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.n_restarts < 1:
            raise ValueError("batch_size and n_restarts must be >= 1")


def _nudge_duplicates(arms: np.ndarray) -> np.ndarray:
    """Separate near-identical arms so conditioning stays well posed."""
    out = arms
    for j in range(1, len(arms)):
        d2 = np.sum((out[:j] - out[j]) ** 2, axis=1)
        if np.any(d2 < _DUP_TOL**2):
            if out is arms:
                out = arms.copy()
            shift = np.where(out[j] < 0.5, _DUP_NUDGE, -_DUP_NUDGE)
            out[j] = out[j] + shift
    return out


class TerminalVariance:
    """Total fantasized variance at fixed nodes, as a function of the arms.

    Precomputes everything that depends only on the training set and the
    nodes, so per-candidate cost is a rank-B update.  ``value_and_grad``
    evaluates all central-difference perturbations as one stacked batch of
    B x B solves.
    """

    def __init__(self, gp: GpPosterior, nodes: np.ndarray):
        self.gp = gp
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        params = gp.params
        self.sv = params.signal_variance
        self._jit = 1e-10 * self.sv
        n = len(gp.dataset)
        n_nodes = len(self.nodes)
        if n:
            self._v_nodes = solve_triangular(
                gp._chol, matern52(params, gp.dataset.points, self.nodes),
                lower=True, check_finite=False)
            base = self.sv - np.sum(self._v_nodes**2, axis=0)
        else:
            self._v_nodes = np.zeros((0, n_nodes))
            base = np.full(n_nodes, self.sv)
        self.base_variance = np.maximum(base, 0.0)
        self.base_total = float(np.sum(self.base_variance))

    def _blocks(self, arms: np.ndarray):
        gp, params = self.gp, self.gp.params
        b = len(arms)
        k_aa = matern52(params, arms, arms)
        k_aa[np.diag_indices(b)] += gp.noise_variance
        k_an = matern52(params, arms, self.nodes)
        if len(gp.dataset):
            u = solve_triangular(gp._chol, matern52(params, gp.dataset.points, arms),
                                 lower=True, check_finite=False)
            return u, k_aa - u.T @ u, k_an - u.T @ self._v_nodes
        u = np.zeros((0, b))
        return u, k_aa, k_an

    def value(self, arms: np.ndarray) -> float:
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        if arms.shape[0] == 0:
            return self.base_total
        arms = _nudge_duplicates(arms)
        _, s, cross = self._blocks(arms)
        return self.base_total - self._reduction(s[None], cross[None])[0]

    def _reduction(self, s_stack: np.ndarray, cross_stack: np.ndarray) -> np.ndarray:
        jit = self._jit
        eye = np.eye(s_stack.shape[-1])
        while True:
            try:
                y = np.linalg.solve(s_stack + jit * eye, cross_stack)
                red = np.sum(cross_stack * y, axis=(1, 2))
                if np.all(np.isfinite(red)):
                    return red
            except np.linalg.LinAlgError:
                pass
            jit *= 10.0
            if jit > 1e-4 * self.sv:
                raise np.linalg.LinAlgError("conditioning matrix stayed singular")

    def value_and_grad(self, arms: np.ndarray, step: float = _FD_STEP):
        """Value plus central-difference gradient, batched over coordinates."""
        arms = _nudge_duplicates(np.atleast_2d(np.asarray(arms, dtype=float)))
        b, d = arms.shape
        gp, params = self.gp, self.gp.params
        u, s, cross = self._blocks(arms)
        n_nodes = len(self.nodes)

        # perturbed copies of each arm: index p = (arm j, coord c, +/-)
        n_pert = 2 * b * d
        delta = np.zeros((2 * d, d))
        delta[np.arange(0, 2 * d, 2), np.arange(d)] = step
        delta[np.arange(1, 2 * d, 2), np.arange(d)] = -step
        pts = np.repeat(arms, 2 * d, axis=0) + np.tile(delta, (b, 1))
        j_idx = np.repeat(np.arange(b), 2 * d)

        k_pn = matern52(params, pts, self.nodes)
        k_pa = matern52(params, pts, arms)
        if len(gp.dataset):
            u_p = solve_triangular(gp._chol,
                                   matern52(params, gp.dataset.points, pts),
                                   lower=True, check_finite=False)
            row_s = k_pa - u_p.T @ u
            row_cross = k_pn - u_p.T @ self._v_nodes
            diag_s = self.sv + gp.noise_variance - np.sum(u_p**2, axis=0)
        else:
            row_s = k_pa
            row_cross = k_pn
            diag_s = np.full(n_pert, self.sv + gp.noise_variance)

        s_stack = np.broadcast_to(s, (n_pert, b, b)).copy()
        rng_p = np.arange(n_pert)
        s_stack[rng_p, j_idx, :] = row_s
        s_stack[rng_p, :, j_idx] = row_s
        s_stack[rng_p, j_idx, j_idx] = diag_s
        cross_stack = np.broadcast_to(cross, (n_pert, b, n_nodes)).copy()
        cross_stack[rng_p, j_idx, :] = row_cross

        red = self._reduction(
            np.concatenate([s[None], s_stack]),
            np.concatenate([cross[None], cross_stack]))
        f0 = self.base_total - red[0]
        f_pert = self.base_total - red[1:]
        grad = (f_pert[0::2] - f_pert[1::2]) / (2.0 * step)
        return float(f0), grad.reshape(b * d)


def mtv_value(gp: GpPosterior | None, arms, nodes) -> float:
    """Total post-batch variance at the nodes (arm locations only)."""
    arm_arr = arms.arms if isinstance(arms, Batch) else np.atleast_2d(arms)
    node_arr = nodes.points if isinstance(nodes, SampleSet) else np.atleast_2d(nodes)
    if len(node_arr) == 0:
        raise ValueError("nodes must be nonempty")
    if gp is None:
        gp = GpPosterior.prior(node_arr.shape[1])
    return TerminalVariance(gp, node_arr).value(arm_arr)


def _greedy_maxmin(points: np.ndarray, count: int, start: int) -> np.ndarray:
    sel = [start % len(points)]
    d2 = np.sum((points - points[sel[0]]) ** 2, axis=1)
    while len(sel) < min(count, len(points)):
        nxt = int(np.argmax(d2))
        sel.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[sel]


def design_batch(gp: GpPosterior | None, config: MtvConfig,
                 pstar_config: PStarConfig | None = None,
                 rng: np.random.Generator | None = None,
                 dimension: int | None = None,
                 nodes: SampleSet | None = None,
                 round_index: int = 0) -> Batch:
    """Design a batch of ``config.batch_size`` arms.

    Nodes come from the maximizer sampler (or a Sobol' set when weighting
    is ablated or no surrogate exists) and are held fixed while the arms
    are optimized.  ``nodes`` can be injected to pin them for testing.
    """
    rng = rng or np.random.default_rng()
    if gp is not None:
        dimension = gp.dimension
    if dimension is None:
        raise ValueError("dimension is required when gp is None")
    b = config.batch_size
    pcfg = pstar_config or PStarConfig()
    if pcfg.n_samples is None:
        pcfg = replace(pcfg, n_samples=max(10 * b, 64))

    if nodes is None:
        if config.use_pstar_weights:
            nodes = sample_pstar(gp, pcfg, rng, dimension=dimension)
        else:
            seed = int(rng.integers(2**62))
            stream = SobolStream(dimension, scramble_seed=seed)
            nodes = SampleSet(sobol_points(stream, pcfg.n_samples), "sobol-uniform")

    if not config.optimize:
        if b > len(nodes):
            raise ValueError("insufficient p_* samples")
        idx = rng.choice(len(nodes), size=b, replace=False)
        return Batch(nodes.points[idx], round_index)

    model = gp if gp is not None else GpPosterior.prior(dimension)
    evaluator = TerminalVariance(model, nodes.points)
    bounds = [(0.0, 1.0)] * (b * dimension)

    best_arms = None
    best_val = np.inf
    for r in range(config.n_restarts):
        if config.seed_from_pstar:
            # restart 0 seeds with a spread node subset, the rest with random
            # node subsets; greedy-only seeding collapses restart diversity
            # whenever the node cloud is concentrated
            if r == 0 or len(nodes) <= b:
                seed_arms = _greedy_maxmin(nodes.points, b, start=r)
            else:
                pick = rng.choice(len(nodes), size=b, replace=False)
                seed_arms = nodes.points[pick]
            if len(seed_arms) < b:
                extra = rng.random((b - len(seed_arms), dimension))
                seed_arms = np.vstack([seed_arms, extra])
        else:
            seed_arms = rng.random((b, dimension))
        res = minimize(
            lambda xf: evaluator.value_and_grad(xf.reshape(b, dimension)),
            seed_arms.ravel(), method="L-BFGS-B", jac=True, bounds=bounds,
            options={"maxiter": config.max_opt_iters})
        cand = np.clip(res.x.reshape(b, dimension), 0.0, 1.0)
        cand_val = evaluator.value(cand)
        seed_val = evaluator.value(seed_arms)
        if seed_val < cand_val:  # optimizer must never lose to its own seed
            cand, cand_val = seed_arms, seed_val
        if cand_val < best_val:
            best_val = cand_val
            best_arms = cand
    return Batch(_nudge_duplicates(best_arms), round_index)


def initial_batch(dimension: int, config: MtvConfig,
                  rng: np.random.Generator,
                  pstar_config: PStarConfig | None = None) -> Batch:
    """Round-zero design: no surrogate, uniform maximizer assertion."""
    return design_batch(None, config, pstar_config, rng,
                        dimension=dimension, round_index=0)
