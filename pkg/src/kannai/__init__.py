"""Classical simulator and verification suite for Kannai-transform heat simulation.

The semigroup e^{-AT} with A = L^dagger L is written as a Gaussian-weighted
superposition of unitary wave evolutions exp(-iHs), H the Hermitian dilation
of L, discretized by panel quadrature into a linear combination of unitaries.
"""

from .errors import *  # noqa: F401,F403
from .operators import (DiscreteFactor, FactorKind, ForcingVector, Grid, Slot, TimeProfile,
                        build_biharmonic_1d, build_heat_gradient_1d, build_heat_neumann_1d,
                        build_hj_fourier_factor, custom_factor, lift_to_dimension)
from .dilation import hermitian_dilation
from .pipeline import SimulationProblem, SimulationReport, TheoremGL, Trapezoid, run

__all__ = [
    "DiscreteFactor", "FactorKind", "ForcingVector", "Grid", "Slot", "TimeProfile",
    "build_biharmonic_1d", "build_heat_gradient_1d", "build_heat_neumann_1d",
    "build_hj_fourier_factor", "custom_factor", "lift_to_dimension", "hermitian_dilation",
    "SimulationProblem", "SimulationReport", "TheoremGL", "Trapezoid", "run",
]
