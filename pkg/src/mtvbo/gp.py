"""Exact Gaussian process regression on the unit box.

Matérn 5/2 kernel with per-dimension lengthscales and a constant mean.
Posteriors are immutable: conditioning on proposed points ("fantasizing")
returns a new object and never refits hyperparameters.  Outputs are
standardized internally during fitting and un-standardized on the way out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .sobol import SobolStream, sobol_points

_SQRT5 = math.sqrt(5.0)
_JITTER_START = 1e-10  # relative to signal variance, escalated x10
_JITTER_MAX = 1e-4
_NOISE_FLOOR = 1e-6
_DEGENERATE_SIGNAL = 1e-8

# bounds for the marginal-likelihood search, in standardized output units
_LS_BOUNDS = (math.log(0.01), math.log(10.0))
_SV_BOUNDS = (math.log(1e-4), math.log(1e2))
_MEAN_BOUNDS = (-5.0, 5.0)
_NV_BOUNDS = (math.log(1e-6), math.log(4.0))
_LS_START_BOUNDS = (math.log(0.05), math.log(2.0))


class IllConditionedError(RuntimeError):
    """Kernel matrix stayed non-SPD after jitter escalation."""


@dataclass(frozen=True)
class Dataset:
    """Measured (point, value) pairs on the unit box.

    ``noise_variance`` is the known measurement noise; ``None`` means
    unknown, in which case fitting estimates it (with a small floor).
    """

    points: np.ndarray
    values: np.ndarray
    noise_variance: float | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        if pts.size == 0:
            pts = pts.reshape(0, max(1, pts.shape[-1] if pts.ndim > 1 else 1))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        if len(pts) != len(vals):
            raise ValueError("points and values must have equal length")
        if pts.size and (pts.min() < -1e-12 or pts.max() > 1 + 1e-12):
            raise ValueError("points must lie in the unit box")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "values": self.values.tolist(),
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(
            np.asarray(d["points"], dtype=float),
            np.asarray(d["values"], dtype=float),
            d.get("noise_variance"),
        )


@dataclass(frozen=True)
class KernelParams:
    """Matérn 5/2 hyperparameters plus constant mean.

    ``noise_variance`` is populated only when the noise level was fitted
    rather than supplied with the data.  ``degenerate`` flags a fit that
    fell back to safe defaults (e.g. all observed values identical).
    """

    lengthscales: np.ndarray
    signal_variance: float
    constant_mean: float
    noise_variance: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0):
            raise ValueError("lengthscales must be positive")
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")

    def to_dict(self) -> dict:
        return {
            "lengthscales": self.lengthscales.tolist(),
            "signal_variance": self.signal_variance,
            "constant_mean": self.constant_mean,
            "noise_variance": self.noise_variance,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(
            np.asarray(d["lengthscales"], dtype=float),
            float(d["signal_variance"]),
            float(d["constant_mean"]),
            d.get("noise_variance"),
            bool(d.get("degenerate", False)),
        )


def default_prior_params(dimension: int) -> KernelParams:
    """The asserted prior used when no measurements exist yet."""
    return KernelParams(
        lengthscales=np.full(dimension, 0.5),
        signal_variance=1.0,
        constant_mean=0.0,
        noise_variance=_NOISE_FLOOR,
    )


def matern52(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix K(a, b) for row-stacked point sets."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    diff = (a[:, None, :] - b[None, :, :]) / params.lengthscales
    r = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
    t = _SQRT5 * r
    return params.signal_variance * (1.0 + t + t * t / 3.0) * np.exp(-t)


def _jittered_cholesky(mat: np.ndarray, scale: float) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter until SPD."""
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter = _JITTER_START * scale if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX * scale:
                raise IllConditionedError("ill-conditioned dataset") from None


class GpPosterior:
    """GP conditioned on a dataset; immutable after construction.

    Carries a cached Cholesky factorization of K(X, X) + noise * I so that
    repeated posterior queries and fantasized conditioning are cheap.
    """

    def __init__(self, dataset: Dataset, params: KernelParams):
        self.dataset = dataset
        self.params = params
        if dataset.noise_variance is not None:
            self.noise_variance = float(dataset.noise_variance)
        elif params.noise_variance is not None:
            self.noise_variance = float(params.noise_variance)
        else:
            self.noise_variance = _NOISE_FLOOR
        x = dataset.points
        n = len(dataset)
        kmat = matern52(params, x, x) + self.noise_variance * np.eye(n)
        self._chol = _jittered_cholesky(kmat, params.signal_variance)
        resid = dataset.values - params.constant_mean
        if n:
            self._white = solve_triangular(self._chol, resid, lower=True)
            self._alpha = solve_triangular(self._chol.T, self._white, lower=False)
        else:
            self._white = np.zeros(0)
            self._alpha = np.zeros(0)

    @property
    def dimension(self) -> int:
        return self.dataset.dimension

    @classmethod
    def prior(cls, dimension: int, params: KernelParams | None = None) -> "GpPosterior":
        params = params or default_prior_params(dimension)
        empty = Dataset(np.zeros((0, dimension)), np.zeros(0), None)
        return cls(empty, params)

    def _cross(self, query: np.ndarray) -> np.ndarray:
        return matern52(self.params, self.dataset.points, np.atleast_2d(query))

    def mean(self, query: np.ndarray) -> np.ndarray:
        query = np.atleast_2d(query)
        if query.shape[0] == 0:
            return np.zeros(0)
        if len(self.dataset) == 0:
            return np.full(query.shape[0], self.params.constant_mean)
        return self.params.constant_mean + self._cross(query).T @ self._alpha

    def posterior(self, query: np.ndarray, symmetrize: bool = True):
        """Joint posterior (mean, covariance) at the query points."""
        query = np.atleast_2d(query)
        q = query.shape[0]
        if q == 0:
            return np.zeros(0), np.zeros((0, 0))
        cov = matern52(self.params, query, query)
        if len(self.dataset):
            ks = self._cross(query)
            mean = self.params.constant_mean + ks.T @ self._alpha
            v = solve_triangular(self._chol, ks, lower=True)
            cov = cov - v.T @ v
        else:
            mean = np.full(q, self.params.constant_mean)
        if symmetrize:
            cov = 0.5 * (cov + cov.T)
        return mean, cov

    def variance(self, query: np.ndarray) -> np.ndarray:
        """Marginal posterior variance, no cross terms."""
        query = np.atleast_2d(query)
        if query.shape[0] == 0:
            return np.zeros(0)
        var = np.full(query.shape[0], self.params.signal_variance)
        if len(self.dataset):
            v = solve_triangular(self._chol, self._cross(query), lower=True)
            var = var - np.sum(v * v, axis=0)
        return np.maximum(var, 0.0)

    def joint_sample(self, query: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One draw from the joint posterior at the query points."""
        query = np.atleast_2d(query)
        if query.shape[0] == 0:
            raise ValueError("query must be nonempty")
        mean, cov = self.posterior(query)
        chol = _jittered_cholesky(cov, self.params.signal_variance)
        return mean + chol @ rng.standard_normal(query.shape[0])

    def pair_joint_sample(self, first: np.ndarray, second: np.ndarray,
                          rng: np.random.Generator):
        """Joint 2-point draws for row-matched pairs (first[i], second[i]).

        Equivalent to ``joint_sample`` on each pair separately, but runs all
        pairs as one vectorized batch of independent 2x2 problems.
        """
        first = np.atleast_2d(first)
        second = np.atleast_2d(second)
        n = first.shape[0]
        allpts = np.vstack([first, second])
        mu = self.mean(allpts)
        sv = self.params.signal_variance
        var = np.full(2 * n, sv)
        if len(self.dataset):
            v = solve_triangular(self._chol, self._cross(allpts), lower=True)
            var = var - np.sum(v * v, axis=0)
            cross = np.sum(v[:, :n] * v[:, n:], axis=0)
        else:
            cross = np.zeros(n)
        diff = (first - second) / self.params.lengthscales
        r = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
        t = _SQRT5 * r
        k12 = sv * (1.0 + t + t * t / 3.0) * np.exp(-t) - cross
        jit = _JITTER_START * sv
        l11 = np.sqrt(np.maximum(var[:n], jit))
        l21 = k12 / l11
        l22 = np.sqrt(np.maximum(var[n:] - l21 * l21, jit))
        z = rng.standard_normal((n, 2))
        y1 = mu[:n] + l11 * z[:, 0]
        y2 = mu[n:] + l21 * z[:, 0] + l22 * z[:, 1]
        return y1, y2

    def fantasize(self, arms: np.ndarray) -> "GpPosterior":
        """Condition on proposed arms without measuring them.

        Placeholder outcomes are the current posterior mean, so the
        fantasized mean function is unchanged; the covariance (the part MTV
        uses) is identical for any placeholder choice.  Hyperparameters are
        not refit.  Implemented as a block extension of the cached Cholesky
        factor rather than a rebuild.
        """
        arms = np.atleast_2d(np.asarray(arms, dtype=float))
        if arms.shape[0] == 0:
            return self
        x1 = self.dataset.points
        n, b = len(self.dataset), arms.shape[0]
        k12 = matern52(self.params, x1, arms) if n else np.zeros((0, b))
        k22 = matern52(self.params, arms, arms) + self.noise_variance * np.eye(b)
        if n:
            c = solve_triangular(self._chol, k12, lower=True)
            s = k22 - c.T @ c
        else:
            c = np.zeros((0, b))
            s = k22
        l22 = _jittered_cholesky(0.5 * (s + s.T), self.params.signal_variance)
        chol = np.zeros((n + b, n + b))
        chol[:n, :n] = self._chol
        chol[n:, :n] = c.T
        chol[n:, n:] = l22
        fantasy_y = self.mean(arms)
        data = Dataset(
            np.vstack([x1, arms]) if n else arms,
            np.concatenate([self.dataset.values, fantasy_y]),
            self.dataset.noise_variance,
        )
        out = GpPosterior.__new__(GpPosterior)
        out.dataset = data
        out.params = self.params
        out.noise_variance = self.noise_variance
        out._chol = chol
        resid = data.values - self.params.constant_mean
        out._white = solve_triangular(chol, resid, lower=True)
        out._alpha = solve_triangular(chol.T, out._white, lower=False)
        return out

    def standardized(self) -> "GpPosterior":
        """Equivalent GP with unit signal, zero mean, rescaled data.

        Sampling decisions and argmax locations computed on it match the
        original exactly; optimizer tolerances then see O(1) magnitudes.
        """
        c = self.params.constant_mean
        s = math.sqrt(self.params.signal_variance)
        params = KernelParams(
            lengthscales=self.params.lengthscales,
            signal_variance=1.0,
            constant_mean=0.0,
            noise_variance=None,
            degenerate=self.params.degenerate,
        )
        data = Dataset(
            self.dataset.points,
            (self.dataset.values - c) / s,
            self.noise_variance / self.params.signal_variance,
        )
        return GpPosterior(data, params)


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 8
    max_iters: int = 100
    seed: int = 0


def _negative_mll(theta, x, y, dim, fit_noise, fixed_noise):
    ls = np.exp(theta[:dim])
    sv = math.exp(theta[dim])
    mean = theta[dim + 1]
    nv = math.exp(theta[dim + 2]) if fit_noise else fixed_noise
    params = KernelParams(ls, sv, mean)
    n = len(y)
    kmat = matern52(params, x, x) + nv * np.eye(n)
    try:
        chol = _jittered_cholesky(kmat, sv)
    except IllConditionedError:
        return 1e25
    resid = y - mean
    white = solve_triangular(chol, resid, lower=True)
    val = (0.5 * white @ white + np.sum(np.log(np.diag(chol)))
           + 0.5 * n * math.log(2.0 * math.pi))
    return val if np.isfinite(val) else 1e25


def fit_hyperparams(dataset: Dataset, config: FitConfig = FitConfig()) -> KernelParams:
    """Maximize the log marginal likelihood from multiple start points.

    Outputs are standardized internally; the returned parameters are in raw
    output units.  All-identical values yield a flagged degenerate-safe
    result instead of an error so replications never abort on flat data.
    """
    if len(dataset) < 2:
        raise ValueError("need at least 2 points to fit hyperparameters")
    y = dataset.values
    dim = dataset.dimension
    y_mean = float(np.mean(y))
    y_sd = float(np.std(y))
    if y_sd == 0.0:
        return KernelParams(
            lengthscales=np.full(dim, 0.5),
            signal_variance=_DEGENERATE_SIGNAL,
            constant_mean=y_mean,
            noise_variance=None if dataset.noise_variance is not None else _NOISE_FLOOR,
            degenerate=True,
        )
    ys = (y - y_mean) / y_sd
    fit_noise = dataset.noise_variance is None
    fixed_noise = 0.0 if fit_noise else dataset.noise_variance / y_sd**2

    bounds = [_LS_BOUNDS] * dim + [_SV_BOUNDS, _MEAN_BOUNDS]
    if fit_noise:
        bounds.append(_NV_BOUNDS)
    lo, hi = _LS_START_BOUNDS
    stream = SobolStream(dim, scramble_seed=config.seed)
    ls_starts = lo + sobol_points(stream, config.n_restarts) * (hi - lo)

    best = None
    for r in range(config.n_restarts):
        theta0 = np.concatenate([
            ls_starts[r],
            [0.0, 0.0] + ([math.log(1e-2)] if fit_noise else []),
        ])
        res = minimize(
            _negative_mll,
            theta0,
            args=(dataset.points, ys, dim, fit_noise, fixed_noise),
            method="L-BFGS-B",
            jac="3-point",
            bounds=bounds,
            options={"maxiter": config.max_iters},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e25:
        raise IllConditionedError("ill-conditioned dataset")
    theta = best.x
    ls = np.exp(theta[:dim])
    sv_std = math.exp(theta[dim])
    mean_std = theta[dim + 1]
    fitted_noise = None
    if fit_noise:
        fitted_noise = max(math.exp(theta[dim + 2]), _NOISE_FLOOR) * y_sd**2
    return KernelParams(
        lengthscales=ls,
        signal_variance=sv_std * y_sd**2,
        constant_mean=y_mean + mean_std * y_sd,
        noise_variance=fitted_noise,
    )
