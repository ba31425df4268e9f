"""Dyadic Wiener paths shared by every scheme in a comparison.

A path over [0, T] is stored as its 2**L fine increments together with a
pyramid of block sums: block k covers 2**k consecutive fine cells and is
defined as the sum of its two halves at block level k - 1.  Increments over
any interval are read from that pyramid, so two adjacent dyadic halves always
add up exactly to their parent and the full-path sum is bit-stable.

Random numbers come from NumPy's Philox4x64 counter-based generator keyed by
the pair (master_seed, path_index), followed by ``Generator.standard_normal``.
A path therefore depends only on its key and shape, never on the order in
which paths are generated or on how they are split across workers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

import numpy as np

from .errors import IncompatibleStepError, LevelTooLargeError

__all__ = [
    "BrownianPath",
    "Step",
    "generate_path",
    "increment_between",
    "steps_for",
    "step_increments",
    "step_level",
    "path_layout",
    "dump_path",
    "load_path",
]

MAX_LEVEL = 62
_HEADER = struct.Struct("<dqqqq")


class Step(NamedTuple):
    t: float
    start: int
    mid: int
    end: int


@dataclass(frozen=True, eq=False)
class BrownianPath:
    horizon: float
    level: int
    m: int
    master_seed: int
    path_index: int
    increments: np.ndarray
    pyramid: tuple

    @property
    def n_cells(self) -> int:
        return 1 << self.level

    @property
    def fine_step(self) -> float:
        return self.horizon / self.n_cells

    @property
    def key(self):
        return (self.master_seed, self.path_index)

    def blocks(self, k: int) -> np.ndarray:
        """Increments over consecutive blocks of 2**k fine cells, shape (2**(L-k), m)."""
        return self.pyramid[k]

    def terminal_value(self) -> np.ndarray:
        """W(T), the root of the pyramid."""
        return self.pyramid[self.level][0]


def _build_pyramid(increments: np.ndarray) -> tuple:
    levels = [increments]
    cur = increments
    while cur.shape[0] > 1:
        cur = cur[0::2] + cur[1::2]
        levels.append(cur)
    for a in levels:
        a.setflags(write=False)
    return tuple(levels)


def _check_key(master_seed: int, path_index: int) -> None:
    if not (0 <= master_seed < 2**63):
        raise ValueError("master_seed must be in [0, 2**63)")
    if not (0 <= path_index < 2**63):
        raise ValueError("path_index must be in [0, 2**63)")


def generate_path(master_seed: int, path_index: int, horizon: float, level: int, m: int) -> BrownianPath:
    """Sample 2**level i.i.d. Normal(0, horizon / 2**level) increments per Wiener component."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if level < 1:
        raise ValueError("level must be >= 1")
    if level > MAX_LEVEL:
        raise LevelTooLargeError()
    if m < 1:
        raise ValueError("m must be >= 1")
    master_seed, path_index = int(master_seed), int(path_index)
    _check_key(master_seed, path_index)
    bitgen = np.random.Philox(key=np.array([master_seed, path_index], dtype=np.uint64))
    n = 1 << level
    increments = np.random.Generator(bitgen).standard_normal((n, m))
    increments *= math.sqrt(horizon / n)
    return BrownianPath(float(horizon), int(level), int(m), master_seed, path_index, increments,
                        _build_pyramid(increments))


def increment_between(path: BrownianPath, i_a: int, i_b: int) -> np.ndarray:
    """W(t_b) - W(t_a) for fine-grid indices 0 <= i_a <= i_b <= 2**L.

    The interval is covered left to right by maximal aligned dyadic blocks and
    their pyramid sums are added in that order.
    """
    n = path.n_cells
    if not (0 <= i_a <= i_b <= n):
        raise IndexError(f"fine indices must satisfy 0 <= {i_a} <= {i_b} <= {n}")
    acc = np.zeros(path.m)
    i = i_a
    while i < i_b:
        k = (i & -i).bit_length() - 1 if i else path.level
        while (1 << k) > i_b - i:
            k -= 1
        acc = acc + path.pyramid[k][i >> k]
        i += 1 << k
    return acc


def step_level(horizon: float, h: float) -> int:
    """Integer l with h == horizon * 2**-l, else :class:`IncompatibleStepError`."""
    if not (h > 0 and math.isfinite(h)):
        raise IncompatibleStepError()
    ratio = horizon / h
    l = round(math.log2(ratio)) if ratio >= 1 else -1
    if l < 0 or horizon * 2.0**-l != h:
        raise IncompatibleStepError()
    return l


def steps_for(path: BrownianPath, h: float, t_end: float | None = None) -> list:
    """Step schedule (t_n, start, midpoint, end fine indices) over [0, t_end].

    ``t_end`` defaults to the path horizon and must be a whole number of steps.
    """
    l = step_level(path.horizon, h)
    if l + 1 > path.level:
        raise IncompatibleStepError()
    cells = 1 << (path.level - l)
    n_steps = _n_steps(path, h, t_end)
    half = cells // 2
    return [Step(n * h, n * cells, n * cells + half, (n + 1) * cells) for n in range(n_steps)]


def _n_steps(path: BrownianPath, h: float, t_end: float | None) -> int:
    total = 1 << step_level(path.horizon, h)
    if t_end is None:
        return total
    n = round(t_end / h)
    if n < 0 or n * h != t_end or n > total:
        raise IncompatibleStepError("t_end is not a whole number of steps inside the path horizon")
    return n


def step_increments(path: BrownianPath, h: float, t_end: float | None = None):
    """Full-step, first-half and second-half increments, each of shape (N, m).

    Equivalent to calling :func:`increment_between` on every entry of
    :func:`steps_for`, but reads whole pyramid levels at once.
    """
    l = step_level(path.horizon, h)
    if l + 1 > path.level:
        raise IncompatibleStepError()
    n = _n_steps(path, h, t_end)
    k = path.level - l
    full = path.pyramid[k][:n]
    halves = path.pyramid[k - 1][: 2 * n]
    return full, halves[0::2], halves[1::2]


def path_layout(t_end: float, finest_h: float):
    """Choose (horizon, level) for paths that must serve steps down to ``finest_h`` on [0, t_end].

    The horizon is ``t_end`` itself when ``t_end / finest_h`` is a power of two,
    otherwise the smallest power of two >= ``t_end``; the level leaves one extra
    halving so Strang midpoints land on the grid.
    """
    if not (t_end > 0 and finest_h > 0):
        raise ValueError("t_end and finest_h must be positive")
    try:
        l = step_level(t_end, finest_h)
        return float(t_end), l + 1
    except IncompatibleStepError:
        pass
    horizon = 2.0 ** math.ceil(math.log2(t_end))
    l = step_level(horizon, finest_h)
    if round(t_end / finest_h) * finest_h != t_end:
        raise IncompatibleStepError("t_end is not a multiple of the step size")
    return horizon, l + 1


def dump_path(path: BrownianPath, fh: BinaryIO) -> None:
    """Write header (T, L, m, master_seed, path_index) and row-major float64 increments, little-endian."""
    fh.write(_HEADER.pack(path.horizon, path.level, path.m, path.master_seed, path.path_index))
    fh.write(np.ascontiguousarray(path.increments, dtype="<f8").tobytes())


def load_path(fh: BinaryIO) -> BrownianPath:
    horizon, level, m, seed, index = _HEADER.unpack(fh.read(_HEADER.size))
    n = 1 << level
    data = np.frombuffer(fh.read(8 * n * m), dtype="<f8")
    if data.size != n * m:
        raise ValueError("truncated path dump")
    increments = data.astype(float).reshape(n, m)
    return BrownianPath(horizon, level, m, seed, index, increments, _build_pyramid(increments))
