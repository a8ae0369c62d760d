"""Minimum-fuel (L1) control of linear systems x' = Ax + Bu, |u| <= 1."""

from .errors import FuelOptError, InvalidArgumentError, NumericFailure, UnreachableError
from .extremal import (ABNORMAL, NORMAL, ControlSignal, Covector, Diagnostics, Trajectory,
                       cost_l1, extremal_control, integrate, pmp_residuals, switching_vector)
from .lti import LtiSystem, hyperbolic_split, kalman_rank_ok
from .reachability import BOUNDARY, INSIDE, OUTSIDE, SupportQuery, member, support
from .solver import (SolveReport, robustness_probe, solve_finite, solve_infinite,
                     solve_time_optimal)

__version__ = "0.1.0"

__all__ = [
    "ABNORMAL", "BOUNDARY", "INSIDE", "NORMAL", "OUTSIDE",
    "ControlSignal", "Covector", "Diagnostics", "FuelOptError", "InvalidArgumentError",
    "LtiSystem", "NumericFailure", "SolveReport", "SupportQuery", "Trajectory",
    "UnreachableError", "cost_l1", "extremal_control", "hyperbolic_split", "integrate",
    "kalman_rank_ok", "member", "pmp_residuals", "robustness_probe", "solve_finite",
    "solve_infinite", "solve_time_optimal", "support", "switching_vector",
]
