"""Sobol' low-discrepancy point generation.

Direction numbers come from the Joe-Kuo D(6) table shipped as a data file;
points follow the classical gray-code construction with 32 bits of
resolution.  An optional seeded Owen-style digit scramble makes distinct but
reproducible streams for replicated experiments, while the unscrambled
stream is bit-reproducible for verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

N_BITS = 32
_SCALE = float(2**N_BITS)
_U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


class SobolDimensionError(ValueError):
    """Requested dimension exceeds the embedded direction-number table."""


def _default_table_path() -> str:
    return str(resources.files("mtvbo").joinpath("data/joe-kuo-d6.txt"))


@lru_cache(maxsize=4)
def _direction_numbers(path: str) -> np.ndarray:
    """Parse a Joe-Kuo style table into per-dimension direction integers.

    The file uses the published convention: a header line, then one row
    ``d s a m_1 ... m_s`` per dimension starting at d = 2.  Dimension 1 is
    the plain van der Corput sequence (all m_k = 1) and is built in.

    Returns an array of shape (max_dim, N_BITS) of uint64 direction
    integers, already shifted so that v_k occupies the top bits.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or not parts[0].isdigit():
                continue
            d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
            m = [int(t) for t in parts[3 : 3 + s]]
            rows.append((d, s, a, m))
    max_dim = 1 + len(rows)
    v = np.zeros((max_dim, N_BITS), dtype=np.uint64)
    # dimension 1: m_k = 1 for all k
    for k in range(N_BITS):
        v[0, k] = np.uint64(1) << np.uint64(N_BITS - 1 - k)
    for d, s, a, m in rows:
        m = list(m)
        for k in range(s, N_BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        for k in range(N_BITS):
            v[d - 1, k] = np.uint64(m[k]) << np.uint64(N_BITS - 1 - k)
    return v


def _mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    # splitmix64 finalizer; used as a keyed PRF for scrambling.
    # uint64 arithmetic wraps by design.
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _scramble_keys(seed: int, dimension: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        base = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _U64_GOLDEN)
        dims = _mix64(base + _U64_GOLDEN * np.arange(1, dimension + 1, dtype=np.uint64))
        levels = _mix64(_U64_GOLDEN * np.arange(1, N_BITS + 1, dtype=np.uint64))
        return _mix64(dims[:, None] ^ levels[None, :])  # (dimension, N_BITS)


def _owen_scramble(ints: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Nested digit scramble: bit l of each value flips according to a
    pseudorandom function of the bits above it, independently per dimension."""
    out = ints.copy()
    for level in range(N_BITS):
        prefix = out >> np.uint64(N_BITS - level)
        flip = _mix64(prefix ^ keys[None, :, level]) & np.uint64(1)
        out ^= flip << np.uint64(N_BITS - 1 - level)
    return out


@dataclass
class SobolStream:
    """A single-consumer cursor into the Sobol' sequence.

    ``index`` is the position in the canonical zero-based sequence; fresh
    streams start at 1 so the all-zeros point is skipped.  Streams with the
    same (dimension, scramble_seed) emit identical values.
    """

    dimension: int
    index: int = 1
    scramble_seed: int | None = None
    table_path: str | None = None
    _keys: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        table = _direction_numbers(self.table_path or _default_table_path())
        if not 1 <= self.dimension <= table.shape[0]:
            raise SobolDimensionError(
                f"dimension {self.dimension} outside supported range "
                f"1..{table.shape[0]}"
            )
        if self.index < 0:
            raise ValueError("index must be nonnegative")
        if self.scramble_seed is not None:
            self._keys = _scramble_keys(self.scramble_seed, self.dimension)

    def take(self, n: int) -> np.ndarray:
        return sobol_points(self, n)


def sobol_points(stream: SobolStream, n: int) -> np.ndarray:
    """Emit the next ``n`` points of the stream as an (n, d) float array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if stream.index + n > 2**N_BITS:
        raise ValueError("Sobol' stream exhausted (2^32 points)")
    v = _direction_numbers(stream.table_path or _default_table_path())
    d = stream.dimension
    idx = np.arange(stream.index, stream.index + n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    ints = np.zeros((n, d), dtype=np.uint64)
    for k in range(N_BITS):
        bit = (gray >> np.uint64(k)) & np.uint64(1)
        ints ^= bit[:, None] * v[None, :d, k]
    if stream._keys is not None:
        ints = _owen_scramble(ints, stream._keys)
    stream.index += n
    return ints.astype(np.float64) / _SCALE
