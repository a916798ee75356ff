"""Graphon mean field games on the circle: Hopf-Cole value solves, conservative
Fokker-Planck transport and a damped fixed-point driver, with Monte Carlo
and optimal-transport cross-checks."""

from .checks import BoundReport
from .errors import BoundViolation, InvalidInputError, NumericalFailure, PositivityError, StabilityError
from .fixed_point import GmfgSolution, PicardConfig, SolveReport, picard_solve, residual_audit, uniqueness_probe
from .fpk import fpk_step, phi2
from .graphon import AlphaGrid, CostModel, Graphon
from .hopf_cole import DriftPotential, phi1
from .montecarlo import McConfig, McEstimate, cost_functional, mc_parabolic, simulate_particles
from .parabolic import TimeGrid
from .scenario import Scenario
from .torus import TorusGrid
from .wasserstein import rho, w1_circle

__all__ = [
    "AlphaGrid", "BoundReport", "BoundViolation", "CostModel", "DriftPotential", "GmfgSolution", "Graphon",
    "InvalidInputError", "McConfig", "McEstimate", "NumericalFailure", "PicardConfig", "PositivityError",
    "Scenario", "SolveReport", "StabilityError", "TimeGrid", "TorusGrid", "cost_functional", "fpk_step",
    "mc_parabolic", "phi1", "phi2", "picard_solve", "residual_audit", "rho", "simulate_particles",
    "uniqueness_probe", "w1_circle",
]
