"""Numerical study of contact interactions obtained as limits of short-range radial potentials."""

from .grid import RadialGrid, build_grid
from .limit import ConvergenceRecord, RateFit, fit_rate, resolvent_difference_norm, run_sweep
from .operators import build_Bk, build_X, lowest_eigenpairs, potential_grid
from .potential import PotentialFamily, RadialPotential, check_assumptions, instantiate, moment
from .scattering import bound_state_energy, scattering_length_bs, scattering_length_ode
from .tuner import build_sweep, fix_a, fix_e, tune_depth

__all__ = [
    "RadialGrid", "build_grid", "ConvergenceRecord", "RateFit", "fit_rate", "resolvent_difference_norm",
    "run_sweep", "build_Bk", "build_X", "lowest_eigenpairs", "potential_grid", "PotentialFamily",
    "RadialPotential", "check_assumptions", "instantiate", "moment", "bound_state_energy",
    "scattering_length_bs", "scattering_length_ode", "build_sweep", "fix_a", "fix_e", "tune_depth",
]
