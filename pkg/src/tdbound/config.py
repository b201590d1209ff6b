"""Numeric tolerances and defaults used across the package."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    time_merge: float = 1e-9      # time points closer than this are the same point
    fifo: float = 1e-9            # allowed arrival-time decrease between samples
    igp_conservation: float = 1e-9
    lp_feasibility: float = 1e-9
    lp_optimality: float = 1e-9
    cost: float = 1e-9            # ATSP cost comparisons
    zeta_zero: float = 1e-6       # fitting deviation treated as zero


TOL = Tolerances()

DEFAULT_HORIZON = 480.0           # minutes, an 8-hour day
DEFAULT_STEP = 5.0                # minutes between discretization points
DEFAULT_ZONES = 6
MAX_EXACT_CUSTOMERS = 16
MAX_BRUTE_FORCE_CUSTOMERS = 9
MAX_ATSP_VERTICES = 60
