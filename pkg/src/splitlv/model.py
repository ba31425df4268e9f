"""Coefficients of the stochastic Lotka-Volterra system.

The model is the 2d-dimensional Ito system

    dX = diag(X) [(-G2 Y + eta2) dt + S2 dW]
    dY = diag(Y) [( G1 X - eta1) dt + S1 dW]

with prey densities X, predator densities Y and an m-dimensional Wiener
process W.  All state arrays carry the species index on the last axis, so an
(n, d) array is a batch of n states and every function here broadcasts over
the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import LogDomainError, NumericalOverflow, ParameterError

__all__ = [
    "ModelParams",
    "State",
    "Hamiltonians",
    "validate_params",
    "is_diagonal_gamma",
    "noise_lambda",
    "star",
    "matvec",
    "ito_coefficients",
    "hamiltonians",
    "check_finite",
]


@dataclass(frozen=True)
class ModelParams:
    """Coefficients G1, G2, eta1, eta2, S1, S2 with dimensions d and m.

    Construction only coerces to float arrays; call :func:`validate_params`
    before using a parameter set.
    """

    d: int
    m: int
    gamma1: np.ndarray
    gamma2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "sigma1", "sigma2"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("eta1", "eta2"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(**{k: data[k] for k in ("d", "m", "gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2")})

    def to_dict(self) -> dict:
        out = {"d": int(self.d), "m": int(self.m)}
        for name in ("gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2"):
            out[name] = getattr(self, name).tolist()
        return out

    @property
    def sigma2_zero(self) -> bool:
        return not np.any(self.sigma2)


@dataclass(frozen=True)
class State:
    """Phase point Z = (X, Y).  ``x`` and ``y`` have shape (..., d)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise ValueError(f"x and y shapes differ: {self.x.shape} vs {self.y.shape}")

    @classmethod
    def from_vector(cls, z) -> "State":
        z = np.asarray(z, dtype=float)
        d = z.shape[-1] // 2
        return cls(z[..., :d], z[..., d:])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.y], axis=-1)

    @property
    def d(self) -> int:
        return self.x.shape[-1]

    def is_positive(self) -> bool:
        return bool(np.all(self.x > 0) and np.all(self.y > 0))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


class Hamiltonians(NamedTuple):
    H1: float
    H2: np.ndarray
    H1X: float
    H1Y: float
    H2X: np.ndarray
    H2Y: np.ndarray


def is_diagonal_gamma(p: ModelParams) -> bool:
    off = ~np.eye(p.d, dtype=bool)
    return not (np.any(p.gamma1[off]) or np.any(p.gamma2[off]))


def validate_params(p: ModelParams) -> ModelParams:
    """Return ``p`` unchanged, or raise :class:`ParameterError` naming every violation."""
    violations = []
    d, m = p.d, p.m
    if not (isinstance(d, (int, np.integer)) and d >= 1 and isinstance(m, (int, np.integer)) and m >= 1):
        raise ParameterError(["dimension mismatch"])
    shapes_ok = (
        p.gamma1.shape == (d, d)
        and p.gamma2.shape == (d, d)
        and p.eta1.shape == (d,)
        and p.eta2.shape == (d,)
        and p.sigma1.shape == (d, m)
        and p.sigma2.shape == (d, m)
    )
    if not shapes_ok:
        violations.append("dimension mismatch")
    arrays = (p.gamma1, p.gamma2, p.eta1, p.eta2, p.sigma1, p.sigma2)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        violations.append("non-finite entry")
    if not (np.all(p.eta1 > 0) and np.all(p.eta2 > 0)):
        violations.append("nonpositive eta entry")
    if shapes_ok:
        if not (np.all(np.diag(p.gamma1) > 0) and np.all(np.diag(p.gamma2) > 0)):
            violations.append("nonpositive gamma diagonal entry")
        off = ~np.eye(d, dtype=bool)
        if np.any(p.gamma1[off] < 0) or np.any(p.gamma2[off] < 0):
            violations.append("negative gamma off-diagonal entry")
    if violations:
        raise ParameterError(violations)
    return p


def noise_lambda(p: ModelParams, k: int) -> np.ndarray:
    """Row-wise sums of squares of S1 (k=1) or S2 (k=2): the Ito correction vector."""
    if k == 1:
        sigma = p.sigma1
    elif k == 2:
        sigma = p.sigma2
    else:
        raise ValueError(f"k must be 1 or 2, got {k}")
    return np.sum(sigma * sigma, axis=1)


def star(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Elementwise product of equal-shape arrays; no broadcasting."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"elementwise product needs equal shapes, got {u.shape} and {v.shape}")
    return u * v


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``a @ v`` over the last axis of ``v``, accumulated left to right.

    The fixed accumulation order keeps every row of a batch bit-identical to
    the same row computed alone, whatever the batch size.
    """
    v = np.asarray(v, dtype=float)
    out = a[:, 0] * v[..., 0:1]
    for j in range(1, a.shape[1]):
        out = out + a[:, j] * v[..., j : j + 1]
    return out


def check_finite(*arrays) -> None:
    """Raise :class:`NumericalOverflow` on the first non-finite component."""
    for a in arrays:
        bad = ~np.isfinite(a)
        if np.any(bad):
            idx = int(np.argwhere(bad)[0][-1])
            raise NumericalOverflow(idx)


def ito_coefficients(p: ModelParams, z: State, *, check: bool = True):
    """Ito drift (..., 2d) and diffusion (..., 2d, m) at ``z``.

    Positivity is not required, since Euler-Maruyama evaluates these on
    whatever state it has reached.
    """
    x, y = z.x, z.y
    with np.errstate(over="ignore", invalid="ignore"):
        drift_x = star(x, -matvec(p.gamma2, y) + p.eta2)
        drift_y = star(y, matvec(p.gamma1, x) - p.eta1)
        drift = np.concatenate([drift_x, drift_y], axis=-1)
        diffusion = np.concatenate([x[..., :, None] * p.sigma2, y[..., :, None] * p.sigma1], axis=-2)
    if check:
        check_finite(drift, diffusion)
    return drift, diffusion


def hamiltonians(p: ModelParams, z: State) -> Hamiltonians:
    """Hamiltonians of the Stratonovich reformulation, split into X and Y parts.

    H1X = sum_i -g1_ii x_i + (eta1_i + Lambda1_i / 2) ln x_i
    H1Y = sum_i -g2_ii y_i + (eta2_i - Lambda2_i / 2) ln y_i
    H2X_j = -sum_i s1_ij ln x_i,   H2Y_j = sum_i s2_ij ln y_i

    With K(Z) from :mod:`splitlv.geometry`, K^-1 grad H1 is the Stratonovich
    drift and K^-1 grad H2 the noise coefficient.  ``z`` must be a single state.
    """
    x = np.asarray(z.x, dtype=float)
    y = np.asarray(z.y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise LogDomainError()
    lx, ly = np.log(x), np.log(y)
    lam1, lam2 = noise_lambda(p, 1), noise_lambda(p, 2)
    h1x = float(np.sum(-np.diag(p.gamma1) * x + (p.eta1 + 0.5 * lam1) * lx))
    h1y = float(np.sum(-np.diag(p.gamma2) * y + (p.eta2 - 0.5 * lam2) * ly))
    h2x = -(lx @ p.sigma1)
    h2y = ly @ p.sigma2
    return Hamiltonians(h1x + h1y, h2x + h2y, h1x, h1y, h2x, h2y)
