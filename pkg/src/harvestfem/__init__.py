"""Finite-element solver for N-species advection-reaction-diffusion competition
with stocking and harvesting, using decoupled linearised BE and BDF2 steps."""

from .errors import ConfigurationError, DivergenceError, HarvestFemError, SolverError
from .mesh import Mesh, build_mesh, unit_square
from .quadrature import QuadratureRule, quadrature
from .space import Field, FESpace, build_space, evaluate_basis
from .functions import SpaceTimeFunction, constant, parse_expression
from .operators import (
    apply_dirichlet,
    assemble_advection,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
)
from .timesteppers import (
    Dirichlet,
    NoFlux,
    Problem,
    RunResult,
    Scheme,
    SpeciesParams,
    Stepper,
    compute_alpha,
    dbdf2_step,
    dbe_step,
    run,
)

__version__ = "0.1.0"
