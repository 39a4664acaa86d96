"""Stochastic-geometry analysis and simulation of LTE RACH access for IoT devices."""

from rachgeo.core import (
    AnalyticResult,
    Backoff,
    Baseline,
    LinearParams,
    NetworkParams,
    PowerRamping,
    ValidationError,
    validate,
    waiting_time,
)
from rachgeo.specfun import gauss2f1_interference, interference_exponent
from rachgeo.analytic import (
    backoff_failure,
    baseline_failure,
    ramping_average_failure,
    ramping_state_failures,
    voronoi_load_factor,
)
from rachgeo.dtmc import (
    FixedPointReport,
    SteadyState,
    backoff_matrix,
    ramping_matrix,
    solve_backoff,
    solve_ramping,
    steady_state,
)
from rachgeo.optimizer import BackoffOptimum, BackoffSearchSpace, optimize_backoff
from rachgeo.simulator import (
    Realization,
    SimStats,
    generate_realization,
    simulate,
    slot_outcomes,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticResult",
    "Backoff",
    "BackoffOptimum",
    "BackoffSearchSpace",
    "Baseline",
    "FixedPointReport",
    "LinearParams",
    "NetworkParams",
    "PowerRamping",
    "Realization",
    "SimStats",
    "SteadyState",
    "ValidationError",
    "backoff_failure",
    "backoff_matrix",
    "baseline_failure",
    "gauss2f1_interference",
    "generate_realization",
    "interference_exponent",
    "optimize_backoff",
    "ramping_average_failure",
    "ramping_matrix",
    "ramping_state_failures",
    "simulate",
    "slot_outcomes",
    "solve_backoff",
    "solve_ramping",
    "steady_state",
    "validate",
    "voronoi_load_factor",
    "waiting_time",
]
