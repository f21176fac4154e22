"""Stationary singular mean-field control of an Ornstein-Uhlenbeck state.

Free boundaries of the associated Dynkin game, the invariant law of the
reflected process, the potential-game equilibrium and a Monte Carlo engine
that checks each closed form.
"""

from .equilibrium import (
    ConstrainedSolution,
    Equilibrium,
    solve_lambda_given_theta,
    solve_potential_mfg,
    solve_theta_given_lambda,
    value_derivative,
)
from .errors import InconsistentBoundaries, NoBracket, NonConvergence, ParameterError, RangeError
from .free_boundary import Boundaries, dynkin_value, ergodic_value, solve_boundaries
from .model import DerivedConstants, ModelParams, cost_l, cost_lx, cost_ltheta, target_points, validate_params
from .simulate import SimConfig, SimStats, simulate_dynkin, simulate_reflected
from .special import OdeBasis, erfc, fundamental_pair, particular_solution
from .stationary import StationaryStats, consistency_residuals, speed_density, stationary_mean, stationary_pdf_cdf

__version__ = "0.1.0"

__all__ = [
    "Boundaries",
    "ConstrainedSolution",
    "DerivedConstants",
    "Equilibrium",
    "InconsistentBoundaries",
    "ModelParams",
    "NoBracket",
    "NonConvergence",
    "OdeBasis",
    "ParameterError",
    "RangeError",
    "SimConfig",
    "SimStats",
    "StationaryStats",
    "consistency_residuals",
    "cost_l",
    "cost_lx",
    "cost_ltheta",
    "dynkin_value",
    "erfc",
    "ergodic_value",
    "fundamental_pair",
    "particular_solution",
    "simulate_dynkin",
    "simulate_reflected",
    "solve_boundaries",
    "solve_lambda_given_theta",
    "solve_potential_mfg",
    "solve_theta_given_lambda",
    "speed_density",
    "stationary_mean",
    "stationary_pdf_cdf",
    "target_points",
    "validate_params",
    "value_derivative",
]
