"""Dimension-scalable test functions with a center-bias distortion.

Every function is exposed as a maximization problem on the unit box: the
box maps affinely to centered coordinates, the distortion shifts a chosen
interior point to the classical center while pinning the boundary, the
result maps to the function's published natural domain, and classical
minimization forms are negated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _ackley(z):
    d = len(z)
    return (-20.0 * math.exp(-0.2 * math.sqrt(np.sum(z * z) / d))
            - math.exp(np.sum(np.cos(2.0 * math.pi * z)) / d) + 20.0 + math.e)


def _dixon_price(z):
    i = np.arange(2, len(z) + 1)
    return (z[0] - 1.0) ** 2 + np.sum(i * (2.0 * z[1:] ** 2 - z[:-1]) ** 2)


def _griewank(z):
    i = np.arange(1, len(z) + 1)
    return np.sum(z * z) / 4000.0 - np.prod(np.cos(z / np.sqrt(i))) + 1.0


def _levy(z):
    w = 1.0 + (z - 1.0) / 4.0
    head = math.sin(math.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1.0) ** 2
                 * (1.0 + 10.0 * np.sin(math.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + math.sin(2.0 * math.pi * w[-1]) ** 2)
    return head + mid + tail


def _michalewicz(z, m=10):
    i = np.arange(1, len(z) + 1)
    return -np.sum(np.sin(z) * np.sin(i * z * z / math.pi) ** (2 * m))


def _rastrigin(z):
    return 10.0 * len(z) + np.sum(z * z - 10.0 * np.cos(2.0 * math.pi * z))


def _rosenbrock(z):
    return np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (1.0 - z[:-1]) ** 2)


def _styblinski_tang(z):
    return 0.5 * np.sum(z**4 - 16.0 * z * z + 5.0 * z)


def _sphere(z):
    return np.sum(z * z)


# name -> (natural domain lo, hi, minimum dimension, minimization form)
FUNCTIONS = {
    "ackley": (-32.768, 32.768, 1, _ackley),
    "dixon_price": (-10.0, 10.0, 1, _dixon_price),
    "griewank": (-600.0, 600.0, 1, _griewank),
    "levy": (-10.0, 10.0, 1, _levy),
    "michalewicz": (0.0, math.pi, 2, _michalewicz),
    "rastrigin": (-5.12, 5.12, 1, _rastrigin),
    "rosenbrock": (-5.0, 10.0, 2, _rosenbrock),
    "styblinski_tang": (-5.0, 5.0, 1, _styblinski_tang),
    "sphere": (-5.12, 5.12, 1, _sphere),
}


def function_names(dimension: int) -> list[str]:
    return [name for name, (_, _, min_d, _) in FUNCTIONS.items()
            if dimension >= min_d]


def distort(u, u0):
    """Piecewise-linear warp of [-1, 1] moving u0 to 0, endpoints fixed."""
    u = np.asarray(u, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    return np.where(u < u0, (u - u0) / (1.0 + u0),
                    np.where(u > u0, (u - u0) / (1.0 - u0),
                             np.zeros(np.broadcast(u, u0).shape)))


@dataclass(frozen=True)
class Problem:
    """A test-function instance: (name, distortion center, noise level)."""

    function_name: str
    dimension: int
    distortion_center: np.ndarray
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.function_name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.function_name!r}; "
                             f"valid: {sorted(FUNCTIONS)}")
        min_d = FUNCTIONS[self.function_name][2]
        if self.dimension < min_d:
            raise ValueError(
                f"{self.function_name} requires dimension >= {min_d}")
        center = np.atleast_1d(np.asarray(self.distortion_center, dtype=float))
        object.__setattr__(self, "distortion_center", center)
        if len(center) != self.dimension:
            raise ValueError("distortion_center must have one entry per dimension")
        if np.any(np.abs(center) >= 1.0):
            raise ValueError("distortion_center must lie strictly inside (-1, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "function_name": self.function_name,
            "dimension": self.dimension,
            "distortion_center": self.distortion_center.tolist(),
            "noise_sd": self.noise_sd,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        return cls(d["function_name"], int(d["dimension"]),
                   np.asarray(d["distortion_center"], dtype=float),
                   float(d.get("noise_sd", 0.0)))


def random_problem(function_name: str, dimension: int,
                   rng: np.random.Generator, noise_sd: float = 0.0) -> Problem:
    """Problem with a center drawn uniformly from (-0.8, 0.8)^d."""
    center = rng.uniform(-0.8, 0.8, size=dimension)
    return Problem(function_name, dimension, center, noise_sd)


def evaluate(problem: Problem, x: np.ndarray) -> float:
    """Noiseless objective at a unit-box point (maximization sign)."""
    x = np.asarray(x, dtype=float)
    if x.min() < -1e-12 or x.max() > 1 + 1e-12:
        raise ValueError("x must lie in the unit box")
    lo, hi, _, fn = FUNCTIONS[problem.function_name]
    u = 2.0 * x - 1.0
    warped = distort(u, problem.distortion_center)
    z = lo + (warped + 1.0) * 0.5 * (hi - lo)
    return -float(fn(z))


def measure(problem: Problem, x: np.ndarray, rng: np.random.Generator) -> float:
    value = evaluate(problem, x)
    if problem.noise_sd > 0:
        value += problem.noise_sd * rng.standard_normal()
    return value
