"""1D soft-Coulomb model: LDA, double-set SIC and HF ground states and real-time dynamics."""

from .dynamics import DynamicsConfig, SicState, boost, run_dynamics
from .grid import Grid1D
from .hamiltonians import Scheme
from .model import ModelParams, System1D
from .observables import TrajectoryRecord, dipole_spectrum, relative_variance
from .static import StaticConfig, StaticResult, solve_static

__all__ = [
    "DynamicsConfig",
    "Grid1D",
    "ModelParams",
    "Scheme",
    "SicState",
    "StaticConfig",
    "StaticResult",
    "System1D",
    "TrajectoryRecord",
    "boost",
    "dipole_spectrum",
    "relative_variance",
    "run_dynamics",
    "solve_static",
]
