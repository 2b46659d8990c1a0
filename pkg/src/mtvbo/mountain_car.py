"""Continuous mountain-car simulator and a 3-parameter linear controller.

Self-contained port of the classic underpowered-car control task: the only
positive reward sits at the hilltop goal, acceleration costs fuel, and an
episode is capped at 999 steps.  The controller is a gain times a 2x1
weight matrix applied to the running-normalized state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POSITION_MIN, POSITION_MAX = -1.2, 0.6
VELOCITY_MAX = 0.07
FORCE_SCALE = 0.0015
GRAVITY_SCALE = 0.0025
GOAL_POSITION = 0.45
GOAL_REWARD = 100.0
ACTION_COST = 0.1
MAX_STEPS = 999
_SD_FLOOR = 1e-6

PARAM_LO, PARAM_HI = -2.0, 2.0  # natural range of gain and weights


@dataclass(frozen=True)
class CarState:
    position: float
    velocity: float


def step(state: CarState, action: float):
    """Advance one tick; returns (state, reward, done)."""
    a = min(max(action, -1.0), 1.0)
    v = state.velocity + a * FORCE_SCALE - GRAVITY_SCALE * math.cos(3.0 * state.position)
    v = min(max(v, -VELOCITY_MAX), VELOCITY_MAX)
    p = state.position + v
    if p < POSITION_MIN:
        p = POSITION_MIN
        if v < 0.0:
            v = 0.0
    elif p > POSITION_MAX:
        p = POSITION_MAX
    reward = -ACTION_COST * a * a
    done = p >= GOAL_POSITION
    if done:
        reward += GOAL_REWARD
    return CarState(p, v), reward, done


class LinearController:
    """Action = gain * (weights . normalized state), clamped to [-1, 1].

    State normalization uses running per-dimension mean and standard
    deviation over every state seen by this controller instance.
    """

    def __init__(self, gain: float, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != (2,):
            raise ValueError("weights must have shape 2x1")
        self.gain = float(gain)
        self.weights = w
        self._w0, self._w1 = float(w[0]), float(w[1])
        self.step_count = 0
        self._mean = [0.0, 0.0]
        self._m2 = [0.0, 0.0]

    @property
    def running_mean(self) -> np.ndarray:
        return np.array(self._mean)

    @property
    def running_sd(self) -> np.ndarray:
        n = max(self.step_count, 1)
        return np.maximum(np.sqrt(np.array(self._m2) / n), _SD_FLOOR)

    def act(self, state: CarState) -> float:
        self.step_count += 1
        n = self.step_count
        s = (state.position, state.velocity)
        norm = [0.0, 0.0]
        for i in range(2):
            delta = s[i] - self._mean[i]
            self._mean[i] += delta / n
            self._m2[i] += delta * (s[i] - self._mean[i])
            sd = math.sqrt(self._m2[i] / n)
            if sd < _SD_FLOOR:
                sd = _SD_FLOOR
            norm[i] = (s[i] - self._mean[i]) / sd
        a = self.gain * (self._w0 * norm[0] + self._w1 * norm[1])
        return min(max(a, -1.0), 1.0)


def run_episode(controller: LinearController, start_position: float) -> float:
    """Return (total reward) of one episode from a standing start."""
    state = CarState(start_position, 0.0)
    total = 0.0
    for _ in range(MAX_STEPS):
        action = controller.act(state)
        state, reward, done = step(state, action)
        total += reward
        if done:
            break
    return total


def controller_from_unit(params) -> LinearController:
    params = np.asarray(params, dtype=float).ravel()
    if params.shape != (3,):
        raise ValueError("expected 3 parameters in the unit box")
    scaled = PARAM_LO + params * (PARAM_HI - PARAM_LO)
    return LinearController(scaled[0], scaled[1:])


def evaluate_controller(params, episodes: int, rng: np.random.Generator) -> float:
    """Mean episodic return of the controller encoded by unit-box params.

    One controller instance accumulates normalization statistics across all
    episodes of the evaluation; start positions come from ``rng``.
    """
    returns = []
    controller = controller_from_unit(params)
    for _ in range(episodes):
        start = rng.uniform(-0.6, -0.4)
        returns.append(run_episode(controller, start))
    return float(np.mean(returns))
