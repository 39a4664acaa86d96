"""System-level Monte Carlo of RACH contention over Poisson networks.

Base stations and devices are dropped as independent PPPs on a square
region centred at the origin. Devices attach to the nearest BS and invert
their path loss so the mean received power at the serving BS equals their
current power-control threshold. Each slot every transmitting device draws
a unit-mean exponential fading gain, and a transmission succeeds when its
SINR at the serving BS clears the detection threshold (capture model: two
devices on the same sequence may both succeed). Statistics are collected
only from devices inside a central measurement disk, leaving the rest of
the region as a guard zone against edge effects.

Random numbers come from per-(realization, slot) substreams derived from a
single seed, so results do not depend on how realizations are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from rachgeo.core import (
    Backoff,
    Baseline,
    EmptyMeasurementSet,
    EmptyNetwork,
    NetworkParams,
    PowerRamping,
    validate,
)
from rachgeo.dtmc import backoff_labels

PER_SEQUENCE = "per_sequence"
FULL = "full"
_MAX_REDRAWS = 100
_CHUNK = 4096


@dataclass(frozen=True)
class Realization:
    bs_points: np.ndarray  # (n_bs, 2) km
    device_points: np.ndarray  # (n_dev, 2) km
    association: np.ndarray  # serving BS index per device
    serving_distance: np.ndarray  # km
    region_side: float
    measurement_radius: float
    eta: float
    n_sequences: int = 1

    @property
    def n_devices(self) -> int:
        return len(self.device_points)

    @property
    def measured(self) -> np.ndarray:
        """Boolean mask of devices inside the measurement disk."""
        return np.hypot(self.device_points[:, 0], self.device_points[:, 1]) <= self.measurement_radius

    def inversion_gain(self) -> np.ndarray:
        """r^eta: transmit power per unit of power-control threshold."""
        return self.serving_distance**self.eta

    def transmit_power(self, rho) -> np.ndarray:
        return np.asarray(rho, dtype=float) * self.inversion_gain()

    def gains(self, observers, cols=None) -> np.ndarray:
        """Received-power gain at each observer's serving BS from devices ``cols``.

        Entry ``[a, b]`` is ``r_b^eta * |u_b - bs(a)|^-eta``, so a device
        transmitting with threshold ``rho_b`` delivers ``rho_b * h_b * gain``.
        The gain is exactly 1 inside the observer's own cell and below 1
        elsewhere (nearest-BS association). Self-gain is zeroed.
        """
        observers = np.asarray(observers, dtype=int)
        cols = np.arange(self.n_devices) if cols is None else np.asarray(cols, dtype=int)
        serving = self.association[observers]
        bs = self.bs_points[serving]
        diff = self.device_points[cols][None, :, :] - bs[:, None, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        g = (self.serving_distance[cols][None, :] / dist) ** self.eta
        g[serving[:, None] == self.association[cols][None, :]] = 1.0
        g[observers[:, None] == cols[None, :]] = 0.0
        return g


def _nearest(points, sites):
    idx = np.empty(len(points), dtype=int)
    dist = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        chunk = points[start : start + _CHUNK]
        d2 = ((chunk[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
        j = d2.argmin(axis=1)  # lowest index wins ties
        idx[start : start + _CHUNK] = j
        dist[start : start + _CHUNK] = np.sqrt(d2[np.arange(len(chunk)), j])
    return idx, dist


def generate_realization(
    params: NetworkParams,
    region_side: float = 10.0,
    seed=0,
    measurement_radius: float = 1.0,
    mode: str = PER_SEQUENCE,
    typical_device: bool = False,
) -> Realization:
    """Draw one network: BS and device PPPs on a ``region_side`` km square.

    In ``per_sequence`` mode the devices are the ``u_tilde`` contenders of a
    single tagged ZC sequence; in ``full`` mode all ``u_tilde * n_z``
    devices are placed and pick a sequence every slot. ``typical_device``
    adds one extra device at the origin.
    """
    if not region_side > 0:
        raise ValueError("region_side must be > 0")
    if mode not in (PER_SEQUENCE, FULL):
        raise ValueError(f"unknown mode {mode!r}")
    validate(params)
    rng = np.random.default_rng(seed)
    area = region_side**2
    half = region_side / 2.0

    for _ in range(_MAX_REDRAWS):
        n_bs = rng.poisson(params.lam * area)
        if n_bs > 0:
            break
    else:
        raise EmptyNetwork(f"no BS drawn in {_MAX_REDRAWS} attempts")
    bs = rng.uniform(-half, half, size=(n_bs, 2))

    intensity = params.u_tilde * (params.n_z if mode == FULL else 1)
    n_dev = rng.poisson(intensity * area)
    devices = rng.uniform(-half, half, size=(n_dev, 2))
    if typical_device:
        devices = np.vstack([np.zeros((1, 2)), devices])
    assoc, dist = _nearest(devices, bs)
    return Realization(
        bs_points=bs,
        device_points=devices,
        association=assoc,
        serving_distance=dist,
        region_side=float(region_side),
        measurement_radius=float(measurement_radius),
        eta=float(params.eta),
        n_sequences=params.n_z if mode == FULL else 1,
    )


def slot_outcomes(
    realization: Realization,
    rho_tx,
    fading,
    params: NetworkParams,
    zc=None,
    observers=None,
    gains=None,
) -> np.ndarray:
    """Success flags for one slot.

    ``rho_tx`` is each device's power-control threshold in mW (0 when
    silent), ``fading`` its power gain and ``zc`` its sequence index
    (``None`` puts everybody on one sequence). Only devices in
    ``observers`` (default: all) are evaluated; a silent observer never
    succeeds. ``gains`` may carry ``realization.gains(observers)`` to avoid
    recomputing geometry every slot.
    """
    rho_tx = np.asarray(rho_tx, dtype=float)
    fading = np.asarray(fading, dtype=float)
    n = realization.n_devices
    observers = np.arange(n) if observers is None else np.asarray(observers, dtype=int)
    if rho_tx.shape != (n,) or fading.shape != (n,):
        raise ValueError("rho_tx and fading need one entry per device")
    theta = params.theta
    sigma2 = params.sigma2
    w = rho_tx * fading
    signal = w[observers]
    tx_obs = rho_tx[observers] > 0

    if zc is None:
        if gains is None:
            gains = realization.gains(observers, np.flatnonzero(rho_tx > 0))
            interference = gains @ w[rho_tx > 0]
        else:
            interference = gains @ w
    else:
        zc = np.asarray(zc)
        interference = np.zeros(len(observers))
        obs_zc = zc[observers]
        for k in np.unique(obs_zc[tx_obs]):
            rows = np.flatnonzero(tx_obs & (obs_zc == k))
            cols = np.flatnonzero((zc == k) & (rho_tx > 0))
            if gains is None:
                g = realization.gains(observers[rows], cols)
            else:
                g = gains[np.ix_(rows, cols)]
            interference[rows] = g @ w[cols]

    return tx_obs & (signal >= theta * (sigma2 + interference))


@dataclass(frozen=True)
class SimStats:
    empirical_p: float
    ci_halfwidth: float  # binomial 95% half-width
    empirical_delay: float  # measured device-slots per success
    state_occupancy: np.ndarray
    state_failure: np.ndarray  # failure fraction per transmitting state (NaN if unused)
    attempts: int
    failures: int
    successes: int
    device_slots: int
    realizations: int
    seed: int
    state_labels: tuple = ()


def default_warmup(scheme) -> int:
    if isinstance(scheme, Backoff):
        return max(10 * (int(scheme.n_slots) + 2), 100)
    if isinstance(scheme, PowerRamping):
        return max(10 * scheme.m, 100)
    return 100


def _scheme_shape(scheme, lp):
    if isinstance(scheme, PowerRamping):
        return scheme.m, scheme.thresholds_dbm
    if isinstance(scheme, Backoff):
        return int(scheme.n_slots) + 2, backoff_labels(int(scheme.n_slots))
    return 1, ("T",)


def _run_realization(params, scheme, slots, warmup, seed, region_side, radius, mode, typical, r):
    lp = validate(params, scheme)
    n_states, _ = _scheme_shape(scheme, lp)
    real = generate_realization(
        params,
        region_side=region_side,
        seed=np.random.SeedSequence(seed, spawn_key=(r, 0)),
        measurement_radius=radius,
        mode=mode,
        typical_device=typical,
    )
    n = real.n_devices
    measured = real.measured
    counts = {
        "attempts": 0,
        "failures": 0,
        "successes": 0,
        "device_slots": 0,
        "occupancy": np.zeros(n_states, dtype=np.int64),
        "state_attempts": np.zeros(n_states, dtype=np.int64),
        "state_failures": np.zeros(n_states, dtype=np.int64),
    }
    if n == 0 or not measured.any():
        return counts

    stateless = isinstance(scheme, Baseline)
    observers = np.flatnonzero(measured) if stateless else np.arange(n)
    obs_measured = measured[observers]
    gains = real.gains(observers) if mode == PER_SEQUENCE else None
    state = np.zeros(n, dtype=int)
    if isinstance(scheme, PowerRamping):
        power_of_state = lp.ladder
    else:
        power_of_state = np.zeros(n_states)
        power_of_state[0] = lp.rho

    for t in range(slots):
        if stateless and t < warmup:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r, 1, t)))
        fading = rng.exponential(size=n)
        zc = rng.integers(real.n_sequences, size=n) if mode == FULL else None
        stay = rng.random(n) if isinstance(scheme, Backoff) else None
        rho_tx = power_of_state[state]
        ok_obs = slot_outcomes(real, rho_tx, fading, params, zc=zc, observers=observers, gains=gains)

        if t >= warmup:
            st = state[observers][obs_measured]
            tx = rho_tx[observers][obs_measured] > 0
            ok = ok_obs[obs_measured]
            counts["device_slots"] += st.size
            counts["attempts"] += int(tx.sum())
            counts["successes"] += int(ok.sum())
            counts["failures"] += int((tx & ~ok).sum())
            counts["occupancy"] += np.bincount(st, minlength=n_states)
            counts["state_attempts"] += np.bincount(st[tx], minlength=n_states)
            counts["state_failures"] += np.bincount(st[tx & ~ok], minlength=n_states)

        if stateless:
            continue
        success = np.zeros(n, dtype=bool)
        success[observers] = ok_obs
        if isinstance(scheme, PowerRamping):
            state = np.where(success, 0, np.minimum(state + 1, n_states - 1))
        else:
            w_state = n_states - 1
            new = state.copy()
            in_t = state == 0
            new[in_t & ~success] = 1  # B_1, or W when N = 0
            in_b = (state > 0) & (state < w_state)
            new[in_b] = state[in_b] + 1
            new[(state == w_state) & (stay < scheme.q)] = 0
            state = new
    return counts


def simulate(
    params: NetworkParams,
    scheme=None,
    slots: int = 600,
    realizations: int = 10,
    seed: int = 0,
    region_side: float = 10.0,
    measurement_radius: float = 1.0,
    warmup: Optional[int] = None,
    mode: str = PER_SEQUENCE,
    typical_device: bool = False,
    jobs: int = 1,
) -> SimStats:
    """Evolve every device's scheme chain for ``slots`` slots over several realizations.

    The first ``warmup`` slots of each realization are discarded. All
    devices always have a pending request.
    """
    scheme = Baseline() if scheme is None else scheme
    lp = validate(params, scheme)
    warmup = default_warmup(scheme) if warmup is None else int(warmup)
    if slots <= warmup:
        raise ValueError(f"slots={slots} must exceed warmup={warmup}")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    n_states, labels = _scheme_shape(scheme, lp)

    work = partial(
        _run_realization, params, scheme, slots, warmup, seed, region_side,
        measurement_radius, mode, typical_device,
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, range(realizations)))
    else:
        parts = [work(r) for r in range(realizations)]

    total = {k: sum(p[k] for p in parts) for k in parts[0]}
    if total["device_slots"] == 0:
        raise EmptyMeasurementSet("no device fell inside the measurement disk")
    attempts = int(total["attempts"])
    failures = int(total["failures"])
    successes = int(total["successes"])
    p = failures / attempts if attempts else math.nan
    ci = 1.96 * math.sqrt(p * (1.0 - p) / attempts) if attempts else math.nan
    with np.errstate(invalid="ignore", divide="ignore"):
        state_failure = total["state_failures"] / total["state_attempts"]
    return SimStats(
        empirical_p=p,
        ci_halfwidth=ci,
        empirical_delay=total["device_slots"] / successes if successes else math.inf,
        state_occupancy=total["occupancy"] / total["device_slots"],
        state_failure=state_failure,
        attempts=attempts,
        failures=failures,
        successes=successes,
        device_slots=int(total["device_slots"]),
        realizations=realizations,
        seed=seed,
        state_labels=tuple(labels),
    )
