from .config import GradientSolverConfig, GraspConfig, LagrangianConfig, SamplingSolverConfig
from .gradient import clip_gradient_norm, gd_solve, lagrangian_solve, pgd_solve
from .grasp import cem_sync, grasp_solve
from .sampling import (
    categorical_cem_solve,
    cem_solve,
    icem_solve,
    mppi_solve,
    mppi_weights,
    predictive_sampling_solve,
    refit_categorical,
)
from .simplex import project_simplex

__all__ = [
    "GradientSolverConfig",
    "GraspConfig",
    "LagrangianConfig",
    "SamplingSolverConfig",
    "categorical_cem_solve",
    "cem_solve",
    "cem_sync",
    "clip_gradient_norm",
    "gd_solve",
    "grasp_solve",
    "icem_solve",
    "lagrangian_solve",
    "mppi_solve",
    "mppi_weights",
    "pgd_solve",
    "predictive_sampling_solve",
    "project_simplex",
    "refit_categorical",
]
