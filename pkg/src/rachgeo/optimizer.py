"""Exhaustive search for the back-off parameters minimising the mean waiting time."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np

from rachgeo.core import AllPointsDiverged, NetworkParams, validate
from rachgeo.dtmc import DEFAULT_EPSILON, DEFAULT_MAX_ITER, solve_backoff

#: Relative delay gap below which two grid points count as tied.
TIE_RTOL = 1e-6


@dataclass(frozen=True)
class BackoffSearchSpace:
    n_max: int = 20
    q_grid: tuple = field(default_factory=lambda: tuple(np.round(np.arange(1, 101) / 100, 2)))

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_grid)
        object.__setattr__(self, "q_grid", q)
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max={self.n_max} must be a nonnegative integer")
        if not q:
            raise ValueError("q_grid must not be empty")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("q_grid must be strictly ascending")
        if q[0] <= 0 or q[-1] != 1.0:
            raise ValueError("q_grid must lie in (0, 1] and include 1")

    @classmethod
    def with_step(cls, n_max=20, q_step=0.01):
        k = int(round(1.0 / q_step))
        if not math.isclose(k * q_step, 1.0, rel_tol=1e-9):
            raise ValueError(f"q_step={q_step} must divide 1")
        return cls(n_max=n_max, q_grid=tuple(np.round(np.arange(1, k + 1) / k, 12)))


@dataclass(frozen=True)
class BackoffOptimum:
    n_star: int
    q_star: float
    delay_star: float
    failure_at_opt: float
    t_prob_at_opt: float
    x_at_opt: np.ndarray
    surface: Optional[np.ndarray] = None  # delay[N, q_index], NaN where not converged
    q_grid: tuple = ()


def _row(params, q_grid, epsilon, max_iter, n):
    out = []
    for q in q_grid:
        rep = solve_backoff(params, n, q, epsilon=epsilon, max_iter=max_iter)
        out.append(rep if rep.converged else None)
    return out


def optimize_backoff(
    params: NetworkParams,
    space: Optional[BackoffSearchSpace] = None,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    keep_surface: bool = True,
    jobs: int = 1,
    tie_rtol: float = TIE_RTOL,
) -> BackoffOptimum:
    """Grid search over ``(N, q)`` for the smallest waiting time.

    The waiting time depends on ``(N, q)`` essentially through ``N + 1/q``,
    so the optimum is a flat valley with many near-equal grid points.
    Points within ``tie_rtol`` of the minimum are treated as tied and the
    one with the largest ``q`` (then smallest ``N``) is returned, i.e. the
    least random waiting.
    """
    space = BackoffSearchSpace() if space is None else space
    validate(params)
    work = partial(_row, params, space.q_grid, epsilon, max_iter)
    ns = range(space.n_max + 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, ns))
    else:
        rows = [work(n) for n in ns]

    surface = np.full((len(rows), len(space.q_grid)), np.nan)
    for n, row in enumerate(rows):
        for j, rep in enumerate(row):
            if rep is not None:
                surface[n, j] = rep.delay
    if np.all(np.isnan(surface)):
        raise AllPointsDiverged("no back-off grid point converged")

    best = np.nanmin(surface)
    tied = [
        (n, j)
        for n in range(surface.shape[0])
        for j in range(surface.shape[1])
        if surface[n, j] <= best * (1.0 + tie_rtol)
    ]
    n_star, j_star = min(tied, key=lambda nj: (-space.q_grid[nj[1]], nj[0]))
    rep = rows[n_star][j_star]
    return BackoffOptimum(
        n_star=n_star,
        q_star=space.q_grid[j_star],
        delay_star=rep.delay,
        failure_at_opt=rep.failure,
        t_prob_at_opt=rep.t_prob,
        x_at_opt=rep.x,
        surface=surface if keep_surface else None,
        q_grid=space.q_grid,
    )
