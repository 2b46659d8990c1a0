"""Persisted ask-tell state for real batch experiments.

A session is one JSON document: natural-unit bounds, accumulated
observations, the batch awaiting measurement, and the serialized RNG state
so that suggestions are reproducible run to run.  Writes are atomic
(temp file then rename), so an interrupted save never corrupts the file.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .gp import KernelParams

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "n_restarts": 8,
    "max_opt_iters": 100,
    "pstar_samples": None,
    "pstar_iterations": 64,
    "pstar_step_scale": 0.25,
}


class MalformedSessionError(ValueError):
    """Session file does not parse or violates its invariants."""


class Session:
    def __init__(self, bounds, batch_size, observations_x=None,
                 observations_y=None, pending_batch=None, rng_state=None,
                 kernel=None, config=None, schema_version=SCHEMA_VERSION):
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise MalformedSessionError("each bound must satisfy lo < hi")
        self.batch_size = int(batch_size)
        if self.batch_size < 1:
            raise MalformedSessionError("batch_size must be >= 1")
        d = len(self.bounds)
        self.observations_x = (np.asarray(observations_x, dtype=float).reshape(-1, d)
                               if observations_x is not None else np.zeros((0, d)))
        self.observations_y = (np.asarray(observations_y, dtype=float).ravel()
                               if observations_y is not None else np.zeros(0))
        if len(self.observations_x) != len(self.observations_y):
            raise MalformedSessionError("observation points/values length mismatch")
        self.pending_batch = (np.asarray(pending_batch, dtype=float).reshape(-1, d)
                              if pending_batch is not None else None)
        if self.pending_batch is not None:
            if len(self.pending_batch) != self.batch_size:
                raise MalformedSessionError(
                    "pending batch must have exactly batch_size arms")
            self._check_inside(self.pending_batch, "pending batch")
        self._check_inside(self.observations_x, "observations")
        self.rng_state = rng_state
        self.kernel = kernel
        self.config = dict(DEFAULT_CONFIG)
        if config:
            self.config.update(config)
        self.schema_version = int(schema_version)

    def _check_inside(self, pts, what):
        if len(pts) == 0:
            return
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        span = hi - lo
        if np.any(pts < lo - 1e-9 * span) or np.any(pts > hi + 1e-9 * span):
            raise MalformedSessionError(f"{what} outside the session bounds")

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    def rng(self) -> np.random.Generator:
        gen = np.random.default_rng(0)
        if self.rng_state is not None:
            gen.bit_generator.state = self.rng_state
        return gen

    def store_rng(self, gen: np.random.Generator) -> None:
        self.rng_state = gen.bit_generator.state

    def to_unit(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return np.clip((np.atleast_2d(pts) - lo) / (hi - lo), 0.0, 1.0)

    def from_unit(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + np.atleast_2d(pts) * (hi - lo)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "bounds": self.bounds.tolist(),
            "batch_size": self.batch_size,
            "observations": [
                {"point": p.tolist(), "value": float(v)}
                for p, v in zip(self.observations_x, self.observations_y)
            ],
            "pending_batch": (self.pending_batch.tolist()
                              if self.pending_batch is not None else None),
            "rng_state": self.rng_state,
            "kernel": self.kernel.to_dict() if self.kernel else None,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        try:
            obs = d.get("observations", [])
            kernel = d.get("kernel")
            return cls(
                bounds=d["bounds"],
                batch_size=d["batch_size"],
                observations_x=[o["point"] for o in obs] or None,
                observations_y=[o["value"] for o in obs] or None,
                pending_batch=d.get("pending_batch"),
                rng_state=d.get("rng_state"),
                kernel=KernelParams.from_dict(kernel) if kernel else None,
                config=d.get("config"),
                schema_version=d.get("schema_version", SCHEMA_VERSION),
            )
        except MalformedSessionError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSessionError(f"bad session document: {exc}") from exc

    def __eq__(self, other) -> bool:
        return isinstance(other, Session) and self.to_dict() == other.to_dict()

    def save(self, path: str) -> None:
        """Atomic write: the old file stays intact if this is interrupted."""
        payload = json.dumps(self.to_dict(), indent=2)
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".session-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    @classmethod
    def load(cls, path: str) -> "Session":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedSessionError(f"cannot read session: {exc}") from exc
        if not isinstance(data, dict):
            raise MalformedSessionError("session document must be a JSON object")
        return cls.from_dict(data)
