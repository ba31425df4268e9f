"""Symplectic form, frozen-noise step Jacobians and the phase-area diagnostic.

The splitting schemes preserve K(Z) = [[0, -K*], [K*, 0]] with
K* = diag(1 / (x_i y_i)) in the sense J^T K(Z') J = K(Z), where J is the
Jacobian of one step with respect to the starting state and the Brownian
increments are held fixed.  The check is only meaningful for diagonal G1, G2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .brownian import generate_path, path_layout
from .errors import AnalyticJacobianUnavailable, KUndefinedError, NonDiagonalGammaError
from .integrators import Scheme, flow1, flow2, integrate_ensemble, step_em, step_lie_trotter, step_strang
from .model import ModelParams, State, is_diagonal_gamma, matvec, noise_lambda

__all__ = [
    "SymplecticCheck",
    "PhaseAreaSeries",
    "k_matrix",
    "flow1_jacobian",
    "flow2_jacobian",
    "step_map",
    "step_jacobian",
    "symplectic_residual",
    "triangle_area",
    "phase_area_experiment",
    "random_trials",
]

FD_BUMP = 1e-6


@dataclass
class SymplecticCheck:
    scheme: Scheme
    z_before: State
    z_after: State
    jacobian: np.ndarray
    residual_norm: float
    relative_residual: float


def k_matrix(z: State) -> np.ndarray:
    x = np.asarray(z.x, dtype=float)
    y = np.asarray(z.y, dtype=float)
    if not (np.all(x > 0) and np.all(y > 0)):
        raise KUndefinedError()
    d = x.shape[-1]
    kstar = np.diag(1.0 / (x * y))
    k = np.zeros((2 * d, 2 * d))
    k[:d, d:] = -kstar
    k[d:, :d] = -k[:d, d:]
    return k


def flow1_jacobian(p: ModelParams, z: State, t: float, dW) -> np.ndarray:
    """d phi1_t / dZ = [[I, 0], [diag(y') G1 t, diag(y'/y)]]."""
    d = p.d
    growth = np.exp((matvec(p.gamma1, z.x) - p.eta1 - 0.5 * noise_lambda(p, 1)) * t + matvec(p.sigma1, np.asarray(dW, dtype=float)))
    y_new = z.y * growth
    j = np.eye(2 * d)
    j[d:, :d] = y_new[:, None] * p.gamma1 * t
    j[d:, d:] = np.diag(growth)
    return j


def flow2_jacobian(p: ModelParams, z: State, t: float, dW) -> np.ndarray:
    """d phi2_t / dZ = [[diag(x'/x), -diag(x') G2 t], [0, I]]."""
    d = p.d
    growth = np.exp((-matvec(p.gamma2, z.y) + p.eta2 - 0.5 * noise_lambda(p, 2)) * t + matvec(p.sigma2, np.asarray(dW, dtype=float)))
    x_new = z.x * growth
    j = np.eye(2 * d)
    j[:d, :d] = np.diag(growth)
    j[:d, d:] = -x_new[:, None] * p.gamma2 * t
    return j


def _increments(scheme: Scheme, increments):
    """Normalise ``increments`` to (dW_full, dW_first, dW_second).

    Strang takes a pair of half-step increments; the other schemes take a
    single full-step increment.
    """
    if scheme is Scheme.STRANG:
        first, second = (np.asarray(a, dtype=float) for a in increments)
        return first + second, first, second
    return np.asarray(increments, dtype=float), None, None


def step_map(p: ModelParams, z: State, h: float, increments, scheme) -> State:
    """One step of ``scheme`` from ``z`` with the given frozen increments."""
    scheme = Scheme.parse(scheme)
    full, first, second = _increments(scheme, increments)
    if scheme is Scheme.LIE_TROTTER:
        return step_lie_trotter(p, z, h, full)
    if scheme is Scheme.STRANG:
        return step_strang(p, z, h, first, second)
    return step_em(p, z, h, full)[0]


def _analytic_jacobian(p, z, h, scheme, full, first, second):
    if scheme is Scheme.LIE_TROTTER:
        mid = flow2(p, z, h, full)
        return flow1_jacobian(p, mid, h, full) @ flow2_jacobian(p, z, h, full)
    za = flow2(p, z, 0.5 * h, first)
    zb = flow1(p, za, h, full)
    return flow2_jacobian(p, zb, 0.5 * h, second) @ flow1_jacobian(p, za, h, full) @ flow2_jacobian(p, z, 0.5 * h, first)


def _fd_jacobian(p, z, h, increments, scheme):
    base = z.z
    n = base.size
    j = np.empty((n, n))
    for k in range(n):
        bump = FD_BUMP * max(abs(base[k]), 1.0)
        up, down = base.copy(), base.copy()
        up[k] += bump
        down[k] -= bump
        f_up = step_map(p, State.from_vector(up), h, increments, scheme).z
        f_down = step_map(p, State.from_vector(down), h, increments, scheme).z
        j[:, k] = (f_up - f_down) / (up[k] - down[k])
    return j


def step_jacobian(p: ModelParams, z: State, h: float, increments, scheme, mode: str = "analytic") -> np.ndarray:
    """Jacobian of one step with respect to the starting state, noise frozen.

    ``increments`` is the full-step increment, or the pair of half-step
    increments for Strang.  ``mode`` is ``"analytic"`` (splitting schemes
    only) or ``"finite_difference"`` (central differences, relative bump 1e-6).
    """
    scheme = Scheme.parse(scheme)
    if mode == "analytic":
        if not scheme.is_splitting:
            raise AnalyticJacobianUnavailable()
        full, first, second = _increments(scheme, increments)
        return _analytic_jacobian(p, z, h, scheme, full, first, second)
    if mode in ("finite_difference", "fd"):
        return _fd_jacobian(p, z, h, increments, scheme)
    raise ValueError(f"unknown Jacobian mode {mode!r}")


def symplectic_residual(p: ModelParams, z: State, h: float, increments, scheme) -> SymplecticCheck:
    """Evaluate J^T K(Z') J - K(Z) for one step; Frobenius norms, absolute and relative."""
    if not is_diagonal_gamma(p):
        raise NonDiagonalGammaError()
    scheme = Scheme.parse(scheme)
    k_before = k_matrix(z)
    z_after = step_map(p, z, h, increments, scheme)
    mode = "analytic" if scheme.is_splitting else "finite_difference"
    jac = step_jacobian(p, z, h, increments, scheme, mode)
    resid = jac.T @ k_matrix(z_after) @ jac - k_before
    norm = float(np.linalg.norm(resid))
    return SymplecticCheck(scheme, z, z_after, jac, norm, norm / float(np.linalg.norm(k_before)))


def triangle_area(p1, p2, p3) -> float:
    """Half the absolute determinant of [[x1, y1, 1], [x2, y2, 1], [x3, y3, 1]]."""
    (x1, y1), (x2, y2), (x3, y3) = p1, p2, p3
    return 0.5 * abs(x1 * (y2 - y3) + x2 * (y3 - y1) + x3 * (y1 - y2))


def _areas(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # xs, ys: (time, 3 corners)
    x1, x2, x3 = xs[:, 0], xs[:, 1], xs[:, 2]
    y1, y2, y3 = ys[:, 0], ys[:, 1], ys[:, 2]
    return 0.5 * np.abs(x1 * (y2 - y3) + x2 * (y3 - y1) + x3 * (y1 - y2))


@dataclass
class PhaseAreaSeries:
    """Triangle areas on the coarse grid.  Areas after an overflow are NaN.

    ``overflow_at`` maps a scheme to the coarse step at which a corner
    overflowed, if any.
    """

    times: np.ndarray
    areas: dict
    reference_areas: np.ndarray
    abs_error: dict
    overflow_at: dict = field(default_factory=dict)

    def mean_abs_error(self, scheme, t_min: float = 0.0, t_max: float | None = None) -> float:
        """Time average of |S_n - S_R| over t_min <= t <= t_max; inf if the window holds NaNs."""
        scheme = Scheme.parse(scheme)
        t = self.times
        mask = t >= t_min
        if t_max is not None:
            mask &= t <= t_max
        err = self.abs_error[scheme][mask]
        if np.any(np.isnan(err)):
            return float("inf")
        return float(np.mean(err))


def phase_area_experiment(
    p: ModelParams,
    starts: Sequence[State],
    schemes: Sequence,
    h: float,
    h_ref: float,
    T: float,
    seed: int,
    path_index: int = 0,
) -> PhaseAreaSeries:
    """Track the triangle spanned by three phase points under each scheme and a Strang reference.

    All three corners and all schemes are driven by the same Brownian path,
    keyed by ``(seed, path_index)``, so the triangle is the image of one
    stochastic flow map.  The reference runs at ``h_ref`` and is sampled on
    the coarse grid of step ``h``.
    """
    if p.d != 1:
        raise ValueError("phase area needs d = 1")
    starts = list(starts)
    if len(starts) != 3:
        raise ValueError("need exactly three start points")
    x0 = np.array([np.atleast_1d(s.x) for s in starts], dtype=float)
    y0 = np.array([np.atleast_1d(s.y) for s in starts], dtype=float)
    if not (np.all(x0 > 0) and np.all(y0 > 0)):
        raise ValueError("start points must be strictly positive")
    if h_ref > h:
        raise ValueError("h_ref must not exceed h")
    horizon, level = path_layout(T, h_ref)
    path = generate_path(seed, path_index, horizon, level, p.m)
    z0 = State(x0, y0)

    ref = integrate_ensemble(p, z0, Scheme.STRANG, h_ref, [path], t_end=T)
    stride = int(round(h / h_ref))
    ref_areas = _areas(ref.x[::stride, :, 0], ref.y[::stride, :, 0])
    times = ref.times[::stride]

    areas, errors, overflow = {}, {}, {}
    for scheme in (Scheme.parse(s) for s in schemes):
        ens = integrate_ensemble(p, z0, scheme, h, [path], t_end=T)
        s = _areas(ens.x[:, :, 0], ens.y[:, :, 0])
        areas[scheme] = s
        errors[scheme] = np.abs(s - ref_areas)
        if np.any(ens.overflow_at >= 0):
            overflow[scheme] = int(ens.overflow_at[ens.overflow_at >= 0].min())
    return PhaseAreaSeries(times, areas, ref_areas, errors, overflow)


def random_trials(p: ModelParams, schemes: Sequence, n_trials: int, seed: int,
                  min_level: int = 4, max_level: int = 10, em_level: int = 4,
                  state_range=(0.2, 5.0)):
    """Symplectic residuals on randomised (state, h, noise) trials.

    States are log-uniform in ``state_range``.  Splitting schemes draw
    h = 2**-l with l uniform in [min_level, max_level]; Euler-Maruyama uses
    h = 2**-em_level.  Increments are exact Gaussians for the drawn h.  Yields
    ``(trial, scheme, h, relative_residual)``; the residual is NaN when the
    step leaves the positive orthant and K is undefined.
    """
    schemes = [Scheme.parse(s) for s in schemes]
    rng = np.random.default_rng([seed, 0x53594D50])
    lo, hi = np.log(state_range[0]), np.log(state_range[1])
    for trial in range(n_trials):
        z = State(np.exp(rng.uniform(lo, hi, p.d)), np.exp(rng.uniform(lo, hi, p.d)))
        level = int(rng.integers(min_level, max_level + 1))
        halves = rng.standard_normal((2, p.m))
        for scheme in schemes:
            h = 2.0**-(em_level if scheme is Scheme.EULER_MARUYAMA else level)
            first, second = halves * np.sqrt(h / 2)
            incs = (first, second) if scheme is Scheme.STRANG else first + second
            try:
                rel = symplectic_residual(p, z, h, incs, scheme).relative_residual
            except KUndefinedError:
                rel = float("nan")
            yield trial, scheme, h, rel
