"""Domain types, unit conversion and parameter validation.

Every formula downstream works in linear units: intensities per km^2, powers
in mW and dimensionless ratios. Conversion from dB/dBm happens once, in
:func:`validate` or through the linear accessors on :class:`NetworkParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class RachError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(RachError, ValueError):
    """Raised when one or more parameter invariants are violated.

    ``issues`` holds ``(code, message)`` pairs, one per violated invariant,
    so callers can report everything wrong with a config in a single pass.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(f"{code}: {msg}" for code, msg in self.issues))

    @property
    def codes(self):
        return [code for code, _ in self.issues]


class QOutOfRange(RachError, ValueError):
    pass


class DimensionMismatch(RachError, ValueError):
    pass


class EmptyProfile(RachError, ValueError):
    pass


class NonConvergence(RachError, ArithmeticError):
    pass


class SingularChain(RachError, ArithmeticError):
    pass


class AllPointsDiverged(RachError, RuntimeError):
    pass


class EmptyNetwork(RachError, RuntimeError):
    pass


class EmptyMeasurementSet(RachError, RuntimeError):
    pass


def db_to_linear(x_db):
    if np.ndim(x_db):
        return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (float(x_db) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


# dBm and mW share the same conversion; the aliases keep call sites readable.
dbm_to_mw = db_to_linear
mw_to_dbm = linear_to_db


@dataclass(frozen=True)
class NetworkParams:
    """Network, propagation and detection parameters.

    ``u_tilde`` is the contender intensity on one ZC sequence before any
    scheme-induced thinning (devices/km^2/sequence). Use
    :meth:`from_total_intensity` to start from the total device intensity.
    """

    lam: float  # BS/km^2
    u_tilde: float  # devices/km^2/sequence
    eta: float = 4.0
    rho_dbm: float = -90.0
    sigma2_dbm: float = -90.0
    theta_db: float = -10.0
    n_z: int = 64

    @classmethod
    def from_total_intensity(cls, lam, u_total, n_z=64, **kwargs):
        return cls(lam=lam, u_tilde=u_total / n_z, n_z=n_z, **kwargs)

    @property
    def rho(self) -> float:
        return db_to_linear(self.rho_dbm)

    @property
    def sigma2(self) -> float:
        return db_to_linear(self.sigma2_dbm)

    @property
    def theta(self) -> float:
        return db_to_linear(self.theta_db)

    @property
    def u_total(self) -> float:
        return self.u_tilde * self.n_z


@dataclass(frozen=True)
class Baseline:
    name = "baseline"


@dataclass(frozen=True)
class PowerRamping:
    """Power ramping over a strictly increasing ladder of thresholds in dBm."""

    thresholds_dbm: tuple = (-90.0, -86.0, -82.0, -78.0, -74.0, -70.0)
    name = "ramping"

    def __post_init__(self):
        object.__setattr__(self, "thresholds_dbm", tuple(float(t) for t in self.thresholds_dbm))

    @property
    def thresholds(self) -> np.ndarray:
        return db_to_linear(np.asarray(self.thresholds_dbm, dtype=float))

    @property
    def m(self) -> int:
        return len(self.thresholds_dbm)


@dataclass(frozen=True)
class Backoff:
    """``n_slots`` deterministic back-off slots, then a random wait left w.p. ``q``."""

    n_slots: int = 0
    q: float = 1.0
    name = "backoff"


Scheme = Union[Baseline, PowerRamping, Backoff]


@dataclass(frozen=True)
class LinearParams:
    """Validated parameters, all in linear units."""

    lam: float
    u_tilde: float
    eta: float
    rho: float
    sigma2: float
    theta: float
    n_z: int
    scheme: Scheme
    ladder: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def noise_ratio(self) -> float:
        """sigma^2 / rho."""
        return self.sigma2 / self.rho


def validate(params: NetworkParams, scheme: Optional[Scheme] = None) -> LinearParams:
    """Check every invariant of ``params`` and ``scheme`` and convert to linear units.

    All violations are collected before raising, so a single
    :class:`ValidationError` lists everything that is wrong.
    """
    scheme = Baseline() if scheme is None else scheme
    issues = []

    def finite(name, value):
        if not math.isfinite(value):
            issues.append(("NonFinite", f"{name}={value!r} is not finite"))
            return False
        return True

    if finite("lam", params.lam) and params.lam <= 0:
        issues.append(("LambdaOutOfRange", f"lam={params.lam} must be > 0"))
    if finite("u_tilde", params.u_tilde) and params.u_tilde < 0:
        issues.append(("IntensityOutOfRange", f"u_tilde={params.u_tilde} must be >= 0"))
    if finite("eta", params.eta) and params.eta <= 2:
        issues.append(("EtaOutOfRange", f"eta={params.eta} must be > 2"))
    for name in ("rho_dbm", "sigma2_dbm"):
        finite(name, getattr(params, name))
    if math.isnan(params.theta_db):
        issues.append(("NonFinite", "theta_db is NaN"))
    if int(params.n_z) != params.n_z or params.n_z < 1:
        issues.append(("ZcCountOutOfRange", f"n_z={params.n_z} must be a positive integer"))

    ladder = None
    if isinstance(scheme, PowerRamping):
        t = scheme.thresholds_dbm
        if len(t) == 0:
            issues.append(("EmptyThresholdLadder", "power ramping needs at least one threshold"))
        elif any(b <= a for a, b in zip(t, t[1:])):
            issues.append(("NonMonotoneLadder", f"thresholds {t} must be strictly increasing"))
        else:
            ladder = scheme.thresholds
    elif isinstance(scheme, Backoff):
        if int(scheme.n_slots) != scheme.n_slots or scheme.n_slots < 0:
            issues.append(("NSlotsOutOfRange", f"n_slots={scheme.n_slots} must be a nonnegative integer"))
        if not (0.0 < scheme.q <= 1.0):
            issues.append(("QOutOfRange", f"q={scheme.q} must lie in (0, 1]"))
    elif not isinstance(scheme, Baseline):
        issues.append(("UnknownScheme", f"unsupported scheme {scheme!r}"))

    if issues:
        raise ValidationError(issues)

    return LinearParams(
        lam=float(params.lam),
        u_tilde=float(params.u_tilde),
        eta=float(params.eta),
        rho=params.rho,
        sigma2=params.sigma2,
        theta=params.theta,
        n_z=int(params.n_z),
        scheme=scheme,
        ladder=ladder,
    )


def waiting_time(p: float, t_prob: float = 1.0) -> float:
    """Mean number of slots until a successful RACH attempt, 1 / ((1 - p) T).

    Returns ``inf`` when ``p == 1`` so that sweeps keep running.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p={p} must lie in [0, 1]")
    if not (0.0 < t_prob <= 1.0):
        raise ValueError(f"t_prob={t_prob} must lie in (0, 1]")
    if p == 1.0:
        return math.inf
    return 1.0 / ((1.0 - p) * t_prob)


@dataclass(frozen=True)
class AnalyticResult:
    p: float
    t_prob: float
    delay: float
    per_state_p: Optional[Sequence[float]] = None
    steady_state: Optional[object] = None

    @classmethod
    def from_failure(cls, p, t_prob=1.0, **kwargs):
        return cls(p=p, t_prob=t_prob, delay=waiting_time(p, t_prob), **kwargs)
