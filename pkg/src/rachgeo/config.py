"""Experiment configuration read from an INI-style file (``key = value`` in sections)."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from rachgeo.core import Backoff, Baseline, NetworkParams, PowerRamping, ValidationError, validate

SCHEME_NAMES = ("baseline", "ramping", "backoff")


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


@dataclass
class SimulationConfig:
    region_side: float = 10.0
    measurement_radius: float = 1.0
    slots: int = 600
    realizations: int = 10
    seed: int = 0
    mode: str = "per_sequence"
    warmup: Optional[int] = None
    typical_device: str = "auto"  # auto: only when u_tilde == 0

    def use_typical(self, u_tilde):
        if self.typical_device == "auto":
            return u_tilde == 0
        return self.typical_device == "true"


@dataclass
class ExperimentConfig:
    lam: float = 3.0
    u_tilde: tuple = (3.0, 12.0, 24.0)
    eta: float = 4.0
    rho_dbm: float = -90.0
    sigma2_dbm: float = -90.0
    n_z: int = 64
    schemes: tuple = SCHEME_NAMES
    ladder_dbm: tuple = (-90.0, -86.0, -82.0, -78.0, -74.0, -70.0)
    backoff_n: Optional[int] = None  # fixed (N, q) override; None means optimise per theta
    backoff_q: Optional[float] = None
    theta_start_db: float = -20.0
    theta_stop_db: float = 0.0
    theta_step_db: float = 2.0
    table1_u_tilde: tuple = (3.0, 12.0, 24.0)
    table1_theta_db: tuple = (-10.0, -6.0, -2.0)
    n_max: int = 20
    q_step: float = 0.01
    epsilon: float = 1e-9
    max_iter: int = 10_000
    max_nonconverged_fraction: float = 0.0
    tolerance: float = 0.03
    ci_multiplier: float = 3.0
    max_fail_fraction: float = 0.10
    output: Optional[str] = None
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def thetas_db(self):
        if not self.theta_step_db > 0:
            raise ConfigError("theta step must be > 0")
        if self.theta_stop_db < self.theta_start_db:
            raise ConfigError("theta stop must be >= start")
        n = int(math.floor((self.theta_stop_db - self.theta_start_db) / self.theta_step_db + 1e-9))
        return [round(self.theta_start_db + k * self.theta_step_db, 10) for k in range(n + 1)]

    def network(self, u_tilde, theta_db) -> NetworkParams:
        return NetworkParams(
            lam=self.lam,
            u_tilde=u_tilde,
            eta=self.eta,
            rho_dbm=self.rho_dbm,
            sigma2_dbm=self.sigma2_dbm,
            theta_db=theta_db,
            n_z=self.n_z,
        )

    def fixed_backoff(self) -> Optional[Backoff]:
        if self.backoff_n is None and self.backoff_q is None:
            return None
        if self.backoff_n is None or self.backoff_q is None:
            raise ConfigError("backoff override needs both n_slots and q")
        return Backoff(int(self.backoff_n), float(self.backoff_q))

    def check(self):
        """Raise :class:`ConfigError` listing every problem found."""
        problems = []
        for name in self.schemes:
            if name not in SCHEME_NAMES:
                problems.append(f"unknown scheme {name!r}")
        if not self.u_tilde:
            problems.append("u_tilde list is empty")
        try:
            self.thetas_db()
        except ConfigError as exc:
            problems.append(str(exc))
        candidates = [Baseline(), PowerRamping(self.ladder_dbm)]
        try:
            fixed = self.fixed_backoff()
            if fixed is not None:
                candidates.append(fixed)
        except ConfigError as exc:
            problems.append(str(exc))
        for u in self.u_tilde:
            for scheme in candidates:
                try:
                    validate(self.network(u, self.theta_start_db), scheme)
                except ValidationError as exc:
                    problems.extend(m for _, m in exc.issues if m not in problems)
        if self.n_max < 0:
            problems.append("n_max must be >= 0")
        if not (0 < self.q_step <= 1):
            problems.append("q_step must lie in (0, 1]")
        sim = self.simulation
        if sim.mode not in ("per_sequence", "full"):
            problems.append(f"unknown simulation mode {sim.mode!r}")
        if sim.realizations < 1 or sim.slots < 1:
            problems.append("simulation needs slots >= 1 and realizations >= 1")
        if sim.region_side <= 0 or sim.measurement_radius <= 0:
            problems.append("region_side and measurement_radius must be > 0")
        if sim.typical_device not in ("auto", "true", "false"):
            problems.append("typical_device must be auto, true or false")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


_KEYS = {
    "network": {
        "lambda": ("lam", float),
        "u_tilde": ("u_tilde", _floats),
        "eta": ("eta", float),
        "rho_dbm": ("rho_dbm", float),
        "sigma2_dbm": ("sigma2_dbm", float),
        "n_z": ("n_z", int),
    },
    "schemes": {
        "enabled": ("schemes", lambda s: tuple(v.strip() for v in s.split(",") if v.strip())),
        "ramping_ladder_dbm": ("ladder_dbm", _floats),
        "backoff_n_slots": ("backoff_n", int),
        "backoff_q": ("backoff_q", float),
    },
    "sweep": {
        "theta_start_db": ("theta_start_db", float),
        "theta_stop_db": ("theta_stop_db", float),
        "theta_step_db": ("theta_step_db", float),
    },
    "table1": {
        "u_tilde": ("table1_u_tilde", _floats),
        "theta_db": ("table1_theta_db", _floats),
    },
    "optimizer": {
        "n_max": ("n_max", int),
        "q_step": ("q_step", float),
    },
    "solver": {
        "epsilon": ("epsilon", float),
        "max_iter": ("max_iter", int),
        "max_nonconverged_fraction": ("max_nonconverged_fraction", float),
    },
    "validation": {
        "tolerance": ("tolerance", float),
        "ci_multiplier": ("ci_multiplier", float),
        "max_fail_fraction": ("max_fail_fraction", float),
    },
    "output": {
        "path": ("output", str),
    },
}

_SIM_KEYS = {
    "region_side": float,
    "measurement_radius": float,
    "slots": int,
    "realizations": int,
    "seed": int,
    "mode": str,
    "warmup": int,
    "typical_device": str,
}


def load_config(path=None, text=None) -> ExperimentConfig:
    """Read a config file; keys left out keep their defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = ExperimentConfig()
    updates = {}
    sim_updates = {}
    for section in parser.sections():
        items = parser[section]
        if section == "simulation":
            table = _SIM_KEYS
        elif section in _KEYS:
            table = _KEYS[section]
        else:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in items.items():
            if key not in table:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            raw = raw.strip()
            try:
                if section == "simulation":
                    sim_updates[key] = table[key](raw)
                else:
                    attr, conv = table[key]
                    updates[attr] = None if raw.lower() in ("", "none") else conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r} in [{section}]: {raw!r}") from exc
    cfg = replace(cfg, **updates)
    cfg.simulation = replace(cfg.simulation, **sim_updates)
    return cfg

