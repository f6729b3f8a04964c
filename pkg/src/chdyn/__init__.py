"""Finite element solver for Cahn-Hilliard equations with dynamic boundary conditions."""
from .assembly import Discretization, assemble_boundary, assemble_bulk
from .diagnostics import EnergyReport, energy, energy_inequality_check
from .mesh import Mesh, MeshError, load_mesh, save_mesh, structured_unit_square
from .model import AC, CH, ConfigError, ModelParams
from .potentials import PotentialSplit, double_well_penalized, wetting_energy
from .schur import Potentials, SchurOperator, build_schur, recover_potentials
from .stepper import NewtonConfig, Scheme, StepState

__all__ = [
    "AC", "CH", "ConfigError", "Discretization", "EnergyReport", "Mesh", "MeshError",
    "ModelParams", "NewtonConfig", "PotentialSplit", "Potentials", "SchurOperator", "Scheme",
    "StepState", "assemble_boundary", "assemble_bulk", "build_schur", "double_well_penalized",
    "energy", "energy_inequality_check", "load_mesh", "recover_potentials", "save_mesh",
    "structured_unit_square", "wetting_energy",
]
