"""Exact subflows, the three one-step maps and the trajectory drivers.

phi1 moves the predators with the prey frozen, phi2 moves the prey with the
predators frozen.  Lie-Trotter is phi1_h . phi2_h and Strang is
phi2_{h/2} . phi1_h . phi2_{h/2}; both are implemented literally as those
compositions.  Euler-Maruyama acts on the Ito form and is the non-structure
preserving baseline: it may leave the positive orthant and is never clamped.

Every map accepts states of shape (..., d) with increments of shape (..., m),
so one call advances a whole batch of paths.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .brownian import BrownianPath, step_increments, steps_for
from .errors import NumericalOverflow
from .model import ModelParams, State, check_finite, ito_coefficients, matvec, noise_lambda, star

__all__ = [
    "Scheme",
    "TrajectoryRecord",
    "Ensemble",
    "flow1",
    "flow2",
    "step_lie_trotter",
    "step_strang",
    "step_em",
    "integrate_trajectory",
    "integrate_ensemble",
]


class Scheme(str, enum.Enum):
    LIE_TROTTER = "lie"
    STRANG = "strang"
    EULER_MARUYAMA = "em"

    @classmethod
    def parse(cls, name) -> "Scheme":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {
            "lie": cls.LIE_TROTTER,
            "lie-trotter": cls.LIE_TROTTER,
            "lietrotter": cls.LIE_TROTTER,
            "strang": cls.STRANG,
            "em": cls.EULER_MARUYAMA,
            "euler-maruyama": cls.EULER_MARUYAMA,
            "eulermaruyama": cls.EULER_MARUYAMA,
        }
        if key not in aliases:
            raise ValueError(f"unknown scheme {name!r}")
        return aliases[key]

    @property
    def is_splitting(self) -> bool:
        return self is not Scheme.EULER_MARUYAMA


def _exp_update(base, exponent, check):
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = star(base, np.exp(exponent))
    if check:
        check_finite(out)
        vanished = (out == 0) & (base > 0)
        if np.any(vanished):
            raise NumericalOverflow(int(np.argwhere(vanished)[0][-1]), "numerical underflow")
    return out


def flow1(p: ModelParams, z: State, t: float, dW, *, check: bool = True) -> State:
    """phi1_t: Y <- Y * exp((G1 X - eta1 - Lambda1/2) t + S1 dW), X fixed."""
    dW = np.asarray(dW, dtype=float)
    exponent = (matvec(p.gamma1, z.x) - p.eta1 - 0.5 * noise_lambda(p, 1)) * t + matvec(p.sigma1, dW)
    exponent = np.broadcast_to(exponent, z.y.shape)
    return State(z.x, _exp_update(z.y, exponent, check))


def flow2(p: ModelParams, z: State, t: float, dW, *, check: bool = True) -> State:
    """phi2_t: X <- X * exp((-G2 Y + eta2 - Lambda2/2) t + S2 dW), Y fixed."""
    dW = np.asarray(dW, dtype=float)
    exponent = (-matvec(p.gamma2, z.y) + p.eta2 - 0.5 * noise_lambda(p, 2)) * t + matvec(p.sigma2, dW)
    exponent = np.broadcast_to(exponent, z.x.shape)
    return State(_exp_update(z.x, exponent, check), z.y)


def step_lie_trotter(p: ModelParams, z: State, h: float, dW, *, check: bool = True) -> State:
    return flow1(p, flow2(p, z, h, dW, check=check), h, dW, check=check)


def step_strang(p: ModelParams, z: State, h: float, dW_first, dW_second, *, check: bool = True) -> State:
    """Symmetric step; ``dW_first``/``dW_second`` are the increments over the two half steps."""
    dW_first = np.asarray(dW_first, dtype=float)
    dW_second = np.asarray(dW_second, dtype=float)
    z = flow2(p, z, 0.5 * h, dW_first, check=check)
    z = flow1(p, z, h, dW_first + dW_second, check=check)
    return flow2(p, z, 0.5 * h, dW_second, check=check)


def _noise_term(diffusion, dW):
    out = diffusion[..., 0] * dW[..., None, 0]
    for j in range(1, diffusion.shape[-1]):
        out = out + diffusion[..., j] * dW[..., None, j]
    return out


def step_em(p: ModelParams, z: State, h: float, dW, *, check: bool = True):
    """One Euler-Maruyama step on the Ito form; returns ``(state, positivity_ok)``."""
    dW = np.asarray(dW, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        drift, diffusion = ito_coefficients(p, z, check=check)
        znew = z.z + drift * h + _noise_term(diffusion, np.broadcast_to(dW, diffusion.shape[:-2] + dW.shape[-1:]))
    if check:
        check_finite(znew)
    out = State.from_vector(znew)
    return out, bool(np.all(znew > 0))


@dataclass
class Ensemble:
    """Batched integration result.

    ``x``/``y`` have shape (N+1, n, d) when the full history is kept, otherwise
    (n, d) at the final time.  ``overflow_at[i]`` is the step index whose
    update failed on row i, or -1; such rows are NaN from then on.
    """

    scheme: Scheme
    h: float
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    positive: np.ndarray
    overflow_at: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.overflow_at < 0


@dataclass
class TrajectoryRecord:
    scheme: Scheme
    h: float
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    path_key: tuple
    positivity_ok: np.ndarray
    overflow_at: Optional[int] = None

    @property
    def states(self) -> list:
        return [State(x, y) for x, y in zip(self.xs, self.ys)]

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def _stack_increments(paths: Sequence[BrownianPath], h, t_end):
    parts = [step_increments(path, h, t_end) for path in paths]
    return tuple(np.stack([p[i] for p in parts], axis=1) for i in range(3))


def integrate_ensemble(
    p: ModelParams,
    z0: State,
    scheme,
    h: float,
    paths: Sequence[BrownianPath],
    t_end: float | None = None,
    keep_history: bool = True,
) -> Ensemble:
    """Advance a batch along ``paths`` (one row per path, or one path shared by all rows of ``z0``).

    The state batch has ``max(len(paths), len(z0))`` rows; ``z0`` of shape (d,)
    is broadcast.  Overflowing rows are frozen at NaN and reported, the rest
    continue.
    """
    scheme = Scheme.parse(scheme)
    paths = list(paths)
    for path in paths[1:]:
        if (path.horizon, path.level, path.m) != (paths[0].horizon, paths[0].level, paths[0].m):
            raise ValueError("paths in an ensemble must share horizon, level and m")
    steps_for(paths[0], h, t_end)
    full, first, second = _stack_increments(paths, h, t_end)
    n_steps = full.shape[0]
    x0 = np.atleast_2d(z0.x)
    y0 = np.atleast_2d(z0.y)
    rows = max(len(paths), x0.shape[0])
    x = np.ascontiguousarray(np.broadcast_to(x0, (rows, p.d)), dtype=float)
    y = np.ascontiguousarray(np.broadcast_to(y0, (rows, p.d)), dtype=float)
    if len(paths) == 1 and rows > 1:
        full, first, second = full[:, 0], first[:, 0], second[:, 0]

    times = np.arange(n_steps + 1) * h
    overflow_at = np.full(rows, -1, dtype=np.int64)
    positive = np.empty((n_steps + 1, rows), dtype=bool)
    positive[0] = np.all(x > 0, axis=-1) & np.all(y > 0, axis=-1)
    if keep_history:
        xs = np.empty((n_steps + 1, rows, p.d))
        ys = np.empty((n_steps + 1, rows, p.d))
        xs[0], ys[0] = x, y

    with np.errstate(all="ignore"):
        for n in range(n_steps):
            z = State(x, y)
            if scheme is Scheme.LIE_TROTTER:
                z = step_lie_trotter(p, z, h, full[n], check=False)
            elif scheme is Scheme.STRANG:
                z = step_strang(p, z, h, first[n], second[n], check=False)
            else:
                z, _ = step_em(p, z, h, full[n], check=False)
            x, y = z.x, z.y
            bad = ~(np.all(np.isfinite(x), axis=-1) & np.all(np.isfinite(y), axis=-1))
            if scheme.is_splitting:
                bad |= np.any(x == 0, axis=-1) | np.any(y == 0, axis=-1)
            fresh = bad & (overflow_at < 0)
            if np.any(fresh):
                overflow_at[fresh] = n
                x = np.where(bad[:, None], np.nan, x)
                y = np.where(bad[:, None], np.nan, y)
            positive[n + 1] = np.all(x > 0, axis=-1) & np.all(y > 0, axis=-1)
            if keep_history:
                xs[n + 1], ys[n + 1] = x, y

    if keep_history:
        return Ensemble(scheme, h, times, xs, ys, positive, overflow_at)
    return Ensemble(scheme, h, times, x, y, positive, overflow_at)


def integrate_trajectory(
    p: ModelParams, z0: State, scheme, h: float, path: BrownianPath, t_end: float | None = None
) -> TrajectoryRecord:
    """Integrate one state along one path; stops recording at the first overflow."""
    scheme = Scheme.parse(scheme)
    ens = integrate_ensemble(p, State(np.atleast_1d(z0.x), np.atleast_1d(z0.y)), scheme, h, [path], t_end)
    stop = int(ens.overflow_at[0])
    n_keep = len(ens.times) if stop < 0 else stop + 1
    return TrajectoryRecord(
        scheme=scheme,
        h=h,
        times=ens.times,
        xs=ens.x[:n_keep, 0],
        ys=ens.y[:n_keep, 0],
        path_key=path.key,
        positivity_ok=ens.positive[:n_keep, 0],
        overflow_at=None if stop < 0 else stop,
    )
