"""Gauss hypergeometric interference factor 2F1(1, 1-2/eta; 2-2/eta; -z).

Only this one parameterization is needed by the outage expressions, so the
evaluator is specialised rather than a general 2F1. With ``d = 2/eta`` and
``w = z`` the Pfaff transformation gives

    2F1(1, 1-d; 2-d; -w) = (1+w)^-1 * 2F1(1, 1; 2-d; y),   y = w / (1+w),

whose power series sum_n n! / (2-d)_n y^n converges geometrically for
``y <= 1/2``. For ``y > 1/2`` the series is continued through the connection
formula around ``y = 1``; one of the two branches collapses to a power of
``y`` so only a single series in ``1 - y = 1/(1+w)`` remains.
"""

from __future__ import annotations

import math

from rachgeo.core import NonConvergence

_TERM_RTOL = 1e-16
_MAX_TERMS = 10_000
_ETA4_TOL = 1e-12


def _series_11c(c, y):
    """sum_n n!/(c)_n * y^n, i.e. 2F1(1, 1; c; y) for 0 <= y <= 1/2."""
    total = 1.0
    term = 1.0
    for n in range(_MAX_TERMS):
        term *= (n + 1.0) / (c + n) * y
        total += term
        if term <= _TERM_RTOL * total:
            return total
    raise NonConvergence(f"2F1(1,1;{c};{y}) did not converge in {_MAX_TERMS} terms")


def _check(eta, z):
    if not eta > 2:
        raise ValueError(f"eta={eta} must be > 2")
    if z < 0 or math.isnan(z):
        raise ValueError(f"z={z} must be nonnegative")


def gauss2f1_interference(eta: float, z: float, *, use_arctan: bool = True) -> float:
    """Return 2F1(1, 1 - 2/eta; 2 - 2/eta; -z) for ``z >= 0``.

    The value lies in (0, 1] and equals 1 at ``z = 0``. At ``eta = 4`` this
    reduces to ``arctan(sqrt(z)) / sqrt(z)``, which is used directly unless
    ``use_arctan`` is false.
    """
    _check(eta, z)
    if z == 0:
        return 1.0
    if math.isinf(z):
        return 0.0
    if use_arctan and abs(eta - 4.0) < _ETA4_TOL:
        s = math.sqrt(z)
        return math.atan(s) / s

    d = 2.0 / eta
    c = 2.0 - d
    inv = 1.0 / (1.0 + z)  # 1 - y
    y = z * inv
    if y <= 0.5:
        return inv * _series_11c(c, y)
    # Connection formula with a = b = 1, c - a - b = -d:
    # 2F1(1,1;c;y) = A * 2F1(1,1;1+d;1-y) + (1-y)^-d * Gamma(c) Gamma(d) * y^(d-1)
    # where A = Gamma(c) Gamma(-d) / Gamma(1-d)^2 = -(1-d)/d.
    regular = -(1.0 - d) / d * _series_11c(1.0 + d, inv)
    singular = math.gamma(c) * math.gamma(d) * (1.0 + z) ** d * y ** (d - 1.0)
    return inv * (regular + singular)


def interference_exponent(theta_eff: float, u_eff: float, lam: float, eta: float) -> float:
    """Exponent of the inter-cell Laplace transform, 2 theta u / ((eta-2) lam) * 2F1(...).

    For ``eta = 4`` this is ``(u/lam) sqrt(theta) arctan(sqrt(theta))``.
    """
    if theta_eff < 0 or u_eff < 0:
        raise ValueError("theta_eff and u_eff must be nonnegative")
    if not lam > 0:
        raise ValueError(f"lam={lam} must be > 0")
    if theta_eff == 0 or u_eff == 0:
        return 0.0
    if math.isinf(theta_eff):
        return math.inf
    if abs(eta - 4.0) < _ETA4_TOL:
        s = math.sqrt(theta_eff)
        return u_eff / lam * s * math.atan(s)
    return 2.0 * theta_eff * u_eff / ((eta - 2.0) * lam) * gauss2f1_interference(eta, theta_eff)
