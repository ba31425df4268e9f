"""Monte Carlo studies: strong error against a fine Strang reference, moments, pathwise bounds.

Work is split into fixed-size chunks of consecutive path indices.  Each chunk
is computed independently (one Brownian path per index, keyed by the master
seed) and results are reduced in path-index order, so the numbers do not
depend on how many worker processes run the chunks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .brownian import BrownianPath, generate_path, path_layout, step_increments, step_level
from .integrators import Scheme, TrajectoryRecord, integrate_ensemble
from .model import ModelParams, State, matvec

__all__ = [
    "ConvergenceReport",
    "MomentReport",
    "BoundCheck",
    "fit_order",
    "strong_error_study",
    "strong_error_studies",
    "moment_supremum",
    "pathwise_bound_check",
]

log = logging.getLogger(__name__)

CHUNK_SIZE = 32
EXCLUSION_WARNING_FRACTION = 0.01


@dataclass
class ConvergenceReport:
    scheme: Scheme
    step_sizes: np.ndarray
    rms_errors: np.ndarray
    fitted_slope: float
    fitted_intercept: float
    n_paths: int
    master_seed: int
    reference_h: float
    n_excluded: int = 0
    warning: bool = False


@dataclass
class MomentReport:
    scheme: Scheme
    p: float
    times: np.ndarray
    moment_x: np.ndarray
    moment_y: np.ndarray
    n_paths: int
    sigma2_zero: bool
    n_excluded: int = 0

    @property
    def sup_x(self) -> float:
        return float(np.max(self.moment_x))

    @property
    def sup_y(self) -> float:
        return float(np.max(self.moment_y))


class BoundCheck(NamedTuple):
    ok: bool
    first_violation: Optional[int]


def fit_order(step_sizes, rms_errors):
    """Least-squares line through (log2 h, log2 error); returns (slope, intercept)."""
    h = np.asarray(step_sizes, dtype=float)
    e = np.asarray(rms_errors, dtype=float)
    if h.size < 2 or h.size != e.size:
        raise ValueError("need >= 2 points")
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("step sizes and errors must be positive")
    slope, intercept = np.polyfit(np.log2(h), np.log2(e), 1)
    return float(slope), float(intercept)


def _chunks(n_paths: int):
    return [range(a, min(a + CHUNK_SIZE, n_paths)) for a in range(0, n_paths, CHUNK_SIZE)]


def _run_chunks(fn, chunks, workers: int):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _error_chunk(indices, *, p, z0, schemes, step_sizes, h_ref, T, horizon, level, seed, integrate):
    paths = [generate_path(seed, k, horizon, level, p.m) for k in indices]
    ref = integrate(p, z0, Scheme.STRANG, h_ref, paths, T, keep_history=False)
    zref = np.concatenate([ref.x, ref.y], axis=-1)
    sq = np.empty((len(schemes), len(indices), len(step_sizes)))
    bad = np.empty((len(schemes), len(indices)), dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for a, scheme in enumerate(schemes):
            bad[a] = ~ref.ok
            for b, h in enumerate(step_sizes):
                ens = integrate(p, z0, scheme, h, paths, T, keep_history=False)
                bad[a] |= ~ens.ok
                diff = np.concatenate([ens.x, ens.y], axis=-1) - zref
                sq[a, :, b] = np.sum(diff * diff, axis=-1)
    bad |= ~np.all(np.isfinite(sq), axis=-1)
    return sq, bad


def strong_error_studies(
    p: ModelParams,
    z0: State,
    schemes: Sequence,
    step_sizes: Sequence[float],
    h_ref: float,
    T: float,
    n_paths: int,
    master_seed: int,
    workers: int = 1,
    integrate: Callable = integrate_ensemble,
) -> dict:
    """Endpoint L2(Omega) errors of several schemes against one shared Strang reference.

    Every path index k yields one Brownian path at a level fine enough for the
    reference half-steps; the reference and every (scheme, h) pair run on that
    same path.  For each scheme, a path on which the reference or any run of
    that scheme overflows is dropped and counted in ``n_excluded``.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    schemes = [Scheme.parse(s) for s in schemes]
    step_sizes = np.array(sorted({float(h) for h in step_sizes}, reverse=True))
    if not h_ref < step_sizes.min():
        raise ValueError("h_ref must be smaller than every step size")
    horizon, level = path_layout(T, h_ref)
    for h in step_sizes:
        step_level(horizon, h)
    fn = partial(
        _error_chunk,
        p=p, z0=z0, schemes=schemes, step_sizes=step_sizes, h_ref=h_ref, T=T,
        horizon=horizon, level=level, seed=master_seed, integrate=integrate,
    )
    results = _run_chunks(fn, _chunks(n_paths), workers)
    sq = np.concatenate([r[0] for r in results], axis=1)
    bad = np.concatenate([r[1] for r in results], axis=1)

    reports = {}
    for a, scheme in enumerate(schemes):
        n_excluded = int(bad[a].sum())
        warning = n_excluded > EXCLUSION_WARNING_FRACTION * n_paths
        if warning:
            log.warning("%s: %d of %d paths excluded after overflow", scheme.value, n_excluded, n_paths)
        if n_excluded < n_paths:
            rms = np.sqrt(np.mean(sq[a][~bad[a]], axis=0))
        else:
            rms = np.full(step_sizes.size, math.nan)
        if np.all(rms > 0):
            slope, intercept = fit_order(step_sizes, rms)
        else:
            slope, intercept = math.nan, math.nan
        reports[scheme] = ConvergenceReport(
            scheme, step_sizes.copy(), rms, slope, intercept, n_paths, master_seed, h_ref, n_excluded, warning
        )
    return reports


def strong_error_study(p, z0, scheme, step_sizes, h_ref, T, n_paths, master_seed, workers=1,
                       integrate=integrate_ensemble) -> ConvergenceReport:
    scheme = Scheme.parse(scheme)
    return strong_error_studies(p, z0, [scheme], step_sizes, h_ref, T, n_paths, master_seed,
                                workers, integrate)[scheme]


def _moment_chunk(indices, *, p, z0, scheme, h, T, horizon, level, seed, order):
    paths = [generate_path(seed, k, horizon, level, p.m) for k in indices]
    ens = integrate_ensemble(p, z0, scheme, h, paths, T)
    mx = np.linalg.norm(ens.x, axis=-1) ** order
    my = np.linalg.norm(ens.y, axis=-1) ** order
    return mx.T, my.T, ~ens.ok


def moment_supremum(
    p: ModelParams,
    z0: State,
    scheme,
    h: float,
    T: float,
    n_paths: int,
    master_seed: int,
    moment_p: float,
    workers: int = 1,
) -> MomentReport:
    """Sample means of |X_n|^p and |Y_n|^p at every time node (Euclidean norms).

    Overflowed paths are left out of the means.  The Y moments are reported in
    every case, but are only known to stay bounded when S2 is zero.
    """
    if moment_p < 1:
        raise ValueError("moment order must be >= 1")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    scheme = Scheme.parse(scheme)
    horizon, level = path_layout(T, h)
    fn = partial(_moment_chunk, p=p, z0=z0, scheme=scheme, h=h, T=T, horizon=horizon, level=level,
                 seed=master_seed, order=moment_p)
    results = _run_chunks(fn, _chunks(n_paths), workers)
    mx = np.concatenate([r[0] for r in results])
    my = np.concatenate([r[1] for r in results])
    bad = np.concatenate([r[2] for r in results])
    times = np.arange(mx.shape[1]) * h
    return MomentReport(
        scheme, float(moment_p), times, np.mean(mx[~bad], axis=0), np.mean(my[~bad], axis=0),
        n_paths, p.sigma2_zero, int(bad.sum()),
    )


def pathwise_bound_check(p: ModelParams, record: TrajectoryRecord, path: BrownianPath) -> BoundCheck:
    """Check X_{n+1} <= X_n * exp(eta2 h + S2 dW_n) * (1 + 4 eps) at every recorded step.

    The bound holds for both splitting schemes because every factor that was
    dropped (predation, the Ito correction) only shrinks the prey.  Returns the
    index of the first offending state, if any.
    """
    scheme = Scheme.parse(record.scheme)
    if not scheme.is_splitting:
        raise ValueError("scheme mismatch: pathwise bound applies to splitting schemes only")
    if record.path_key != path.key:
        raise ValueError("record was not produced on this path")
    n = len(record.xs) - 1
    full, _, _ = step_increments(path, record.h, record.h * n)
    slack = 1.0 + 4.0 * np.finfo(float).eps
    exponent = p.eta2 * record.h + matvec(p.sigma2, full)
    bound = record.xs[:-1] * np.exp(exponent) * slack
    violated = np.any(record.xs[1:] > bound, axis=-1)
    if np.any(violated):
        return BoundCheck(False, int(np.argmax(violated)) + 1)
    return BoundCheck(True, None)
