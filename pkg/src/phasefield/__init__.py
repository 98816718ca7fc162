"""Linear, energy-stable EQ/SAV schemes for Allen-Cahn (plain, penalized,
Lagrange-constrained) and Cahn-Hilliard phase-field models in 2D."""

from .grid import Grid2D, apply_operator, gradient_energy, inner_product, laplacian
from .potential import (
    AuxiliaryKind,
    Formulation,
    Identity,
    ModelKind,
    ModelSpec,
    Polynomial,
    QDefinition,
    QPolicy,
)
from .schemes import SchemeConfig, SchemeState, bootstrap_step, initial_state, step
from .solvers import LinearOperatorSpec, RankCorrection, SolverError, krylov_solve, woodbury_solve

__all__ = [
    "AuxiliaryKind",
    "Formulation",
    "Grid2D",
    "Identity",
    "LinearOperatorSpec",
    "ModelKind",
    "ModelSpec",
    "Polynomial",
    "QDefinition",
    "QPolicy",
    "RankCorrection",
    "SchemeConfig",
    "SchemeState",
    "SolverError",
    "apply_operator",
    "bootstrap_step",
    "gradient_energy",
    "initial_state",
    "inner_product",
    "krylov_solve",
    "laplacian",
    "step",
    "woodbury_solve",
]
