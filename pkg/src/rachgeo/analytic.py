"""Closed-form RACH transmission failure probabilities.

Each failure probability has the form ``1 - exp(-noise) * L_intra * L_inter``
where the intra-cell factor comes from the approximate Voronoi cell-size
distribution and the inter-cell factor from the PPP interference field.
Sums are accumulated in the log domain and mapped back with ``expm1``.
"""

from __future__ import annotations

import math

import numpy as np

from rachgeo.core import DimensionMismatch, NetworkParams, db_to_linear
from rachgeo.specfun import interference_exponent

#: Constant of the approximate PPP Voronoi cell area distribution.
VORONOI_C = 3.575


def voronoi_load_factor(u_eff: float, lam: float) -> float:
    """c lam / (c lam + u): equals 1 with no contenders, decreasing in ``u_eff``."""
    return VORONOI_C * lam / (VORONOI_C * lam + u_eff)


def _log_intra(theta_eff, u_eff, lam):
    # log of (P (1 + t) / (P + t))^c; -inf only for an infinite threshold
    if theta_eff == 0 or u_eff == 0:
        return 0.0
    if math.isinf(theta_eff):
        return -math.inf
    load = voronoi_load_factor(u_eff, lam)
    return VORONOI_C * (math.log(load) + math.log1p(theta_eff) - math.log(load + theta_eff))


def _log_success(theta_eff, u_eff, lam, eta):
    """Log Laplace transform of intra- plus inter-cell interference from one device class."""
    return _log_intra(theta_eff, u_eff, lam) - interference_exponent(theta_eff, u_eff, lam, eta)


def _failure_from_log(log_success):
    p = -math.expm1(log_success)
    # guards against rounding only; the formula itself never leaves [0, 1]
    return min(max(p, 0.0), 1.0)


def _single_class_failure(theta, noise_ratio, u_eff, lam, eta):
    if theta == 0:
        return 0.0
    return _failure_from_log(-noise_ratio * theta + _log_success(theta, u_eff, lam, eta))


def baseline_failure(params: NetworkParams) -> float:
    """Failure probability with persistent transmission at threshold ``rho``."""
    return _single_class_failure(
        params.theta, params.sigma2 / params.rho, params.u_tilde, params.lam, params.eta
    )


def backoff_failure(params: NetworkParams, x0: float) -> float:
    """Failure probability when only a fraction ``x0`` of contenders transmits.

    Identical to :func:`baseline_failure` evaluated at intensity ``x0 * u_tilde``.
    """
    if not (0.0 <= x0 <= 1.0):
        raise ValueError(f"x0={x0} must lie in [0, 1]")
    return _single_class_failure(
        params.theta, params.sigma2 / params.rho, x0 * params.u_tilde, params.lam, params.eta
    )


def _as_probs(occupancy):
    return np.asarray(getattr(occupancy, "probs", occupancy), dtype=float)


def ramping_failures_linear(theta, sigma2, ladder, u_tilde, lam, eta, occupancy):
    """Per-state failure probabilities with a linear-unit ladder (mW)."""
    ladder = np.asarray(ladder, dtype=float)
    x = _as_probs(occupancy)
    if x.shape != ladder.shape:
        raise DimensionMismatch(f"occupancy has {x.size} states, ladder has {ladder.size}")
    if theta == 0:
        return np.zeros(ladder.size)
    out = np.empty(ladder.size)
    for m, rho_m in enumerate(ladder):
        log_s = -sigma2 * theta / rho_m
        for rho_k, x_k in zip(ladder, x):
            log_s += _log_success(theta * rho_k / rho_m, x_k * u_tilde, lam, eta)
        out[m] = _failure_from_log(log_s)
    return out


def ramping_state_failures(params: NetworkParams, ladder_dbm, occupancy) -> np.ndarray:
    """Failure probability ``p_m`` of a device at each ramping level.

    Devices at level ``k`` form an independent PPP of intensity
    ``x[k] * u_tilde`` received at ``theta * rho_k / rho_m`` relative to
    the tagged device's threshold ``rho_m``.
    """
    return ramping_failures_linear(
        params.theta,
        params.sigma2,
        db_to_linear(np.asarray(ladder_dbm, dtype=float)),
        params.u_tilde,
        params.lam,
        params.eta,
        occupancy,
    )


def ramping_average_failure(profile, occupancy) -> float:
    """Occupancy-weighted mean of the per-state failure probabilities."""
    p = np.asarray(profile, dtype=float)
    x = _as_probs(occupancy)
    if p.shape != x.shape:
        raise DimensionMismatch(f"profile has {p.size} states, occupancy has {x.size}")
    avg = float(np.dot(x, p))
    return min(max(avg, float(p.min())), float(p.max()))
