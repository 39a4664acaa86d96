"""Scheme Markov chains, their stationary distributions and the coupled fixed points.

The failure probability depends on how many devices transmit (and at which
power), which in turn depends on the stationary distribution of the
per-device chain. :func:`solve_ramping` and :func:`solve_backoff` iterate
failure probability -> transition matrix -> stationary distribution until
the distribution stops moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from rachgeo.analytic import backoff_failure, ramping_average_failure, ramping_failures_linear
from rachgeo.core import (
    Backoff,
    EmptyProfile,
    NetworkParams,
    PowerRamping,
    QOutOfRange,
    SingularChain,
    validate,
    waiting_time,
)

DEFAULT_EPSILON = 1e-9
DEFAULT_MAX_ITER = 10_000
STALL_LIMIT = 50
_STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class SteadyState:
    probs: np.ndarray
    labels: Optional[tuple] = None

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, i):
        return self.probs[i]


@dataclass(frozen=True)
class FixedPointReport:
    steady_state: SteadyState
    failure: float
    t_prob: float
    delay: float
    iterations: int
    final_residual: float
    converged: bool
    per_state: Optional[np.ndarray] = None

    @property
    def x(self) -> np.ndarray:
        return self.steady_state.probs


def _check_stochastic(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError(f"transition matrix must be square and nonempty, got shape {P.shape}")
    if np.any(P < -_STOCHASTIC_TOL) or np.any(P > 1 + _STOCHASTIC_TOL):
        raise ValueError("transition probabilities must lie in [0, 1]")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > _STOCHASTIC_TOL:
        raise ValueError("transition matrix rows must sum to 1")
    return P


def ramping_matrix(profile: Sequence[float]) -> np.ndarray:
    """M x M power-ramping chain: success returns to level 1, failure climbs one level.

    The top level saturates, so its failure mass stays on the diagonal.
    """
    p = np.asarray(profile, dtype=float)
    if p.size == 0:
        raise EmptyProfile("ramping profile needs at least one state")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("per-state failure probabilities must lie in [0, 1]")
    m = p.size
    P = np.zeros((m, m))
    P[:, 0] = 1.0 - p
    idx = np.arange(m - 1)
    P[idx, idx + 1] = p[:-1]
    P[m - 1, m - 1] += p[-1]
    return P


def backoff_matrix(p: float, n_slots: int, q: float) -> np.ndarray:
    """(N+2) x (N+2) back-off chain over states T, B_1..B_N, W."""
    if not (0.0 < q <= 1.0):
        raise QOutOfRange(f"q={q} must lie in (0, 1]")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p={p} must lie in [0, 1]")
    if int(n_slots) != n_slots or n_slots < 0:
        raise ValueError(f"n_slots={n_slots} must be a nonnegative integer")
    n = int(n_slots) + 2
    P = np.zeros((n, n))
    P[0, 0] = 1.0 - p
    P[0, 1] += p
    for i in range(1, n - 1):
        P[i, i + 1] = 1.0
    P[n - 1, 0] += q
    P[n - 1, n - 1] += 1.0 - q
    return P


def backoff_labels(n_slots: int) -> tuple:
    return ("T",) + tuple(f"B{i}" for i in range(1, n_slots + 1)) + ("W",)


def steady_state(P, labels=None) -> SteadyState:
    """Solve x P = x, sum(x) = 1 directly.

    One balance equation is replaced by the normalization row. Raises
    :class:`SingularChain` when the stationary distribution is not unique.
    """
    P = _check_stochastic(P)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularChain("transition matrix has no unique stationary distribution") from exc
    if not np.all(np.isfinite(x)) or np.min(x) < -1e-9 or np.max(np.abs(x @ P - x)) > 1e-10:
        raise SingularChain("transition matrix has no unique stationary distribution")
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    return SteadyState(probs=x, labels=None if labels is None else tuple(labels))


def _iterate(x, step, epsilon, max_iter):
    """Run x <- step(x) until the max-norm change drops below ``epsilon``.

    Switches to half-damped updates once the residual has failed to decrease
    for ``STALL_LIMIT`` consecutive iterations.
    """
    residual = math.inf
    prev = math.inf
    stall = 0
    damped = False
    for it in range(1, max_iter + 1):
        new = step(x)
        if damped:
            new = 0.5 * new + 0.5 * x
        residual = float(np.max(np.abs(new - x)))
        x = new
        if residual < epsilon:
            return x, it, residual, True
        stall = stall + 1 if residual >= prev else 0
        prev = residual
        if stall >= STALL_LIMIT:
            damped = True
    return x, max_iter, residual, False


def solve_ramping(
    params: NetworkParams,
    ladder_dbm=None,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointReport:
    """Self-consistent stationary distribution of the power-ramping chain.

    Starts from equiprobable levels. The reported failure probability is the
    occupancy-weighted mean of the per-level failures at the returned ``x``;
    every device transmits each slot, so ``t_prob = 1``.
    """
    scheme = PowerRamping() if ladder_dbm is None else PowerRamping(tuple(ladder_dbm))
    lp = validate(params, scheme)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    ladder = lp.ladder
    labels = scheme.thresholds_dbm

    def failures(x):
        return ramping_failures_linear(lp.theta, lp.sigma2, ladder, lp.u_tilde, lp.lam, lp.eta, x)

    def step(x):
        return steady_state(ramping_matrix(failures(x))).probs

    x0 = np.full(ladder.size, 1.0 / ladder.size)
    x, iterations, residual, converged = _iterate(x0, step, epsilon, max_iter)
    per_state = failures(x)
    p = ramping_average_failure(per_state, x)
    return FixedPointReport(
        steady_state=SteadyState(x, labels),
        failure=p,
        t_prob=1.0,
        delay=waiting_time(p, 1.0),
        iterations=iterations,
        final_residual=residual,
        converged=converged,
        per_state=per_state,
    )


def solve_backoff(
    params: NetworkParams,
    n_slots: int,
    q: float,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointReport:
    """Self-consistent stationary distribution of the back-off chain.

    Starts with every device in the transmit state. Only that state
    transmits, so ``t_prob`` is its stationary probability and the delay is
    ``1 / (x_T (1 - p))``.
    """
    validate(params, Backoff(n_slots, q))
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    n_slots = int(n_slots)
    labels = backoff_labels(n_slots)

    def step(x):
        p = backoff_failure(params, float(min(x[0], 1.0)))
        return steady_state(backoff_matrix(p, n_slots, q)).probs

    x0 = np.zeros(n_slots + 2)
    x0[0] = 1.0
    x, iterations, residual, converged = _iterate(x0, step, epsilon, max_iter)
    t_prob = float(x[0])
    p = backoff_failure(params, min(t_prob, 1.0))
    return FixedPointReport(
        steady_state=SteadyState(x, labels),
        failure=p,
        t_prob=t_prob,
        delay=waiting_time(p, t_prob),
        iterations=iterations,
        final_residual=residual,
        converged=converged,
    )
