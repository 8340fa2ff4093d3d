"""Partitioned solvers for a 2D advection-diffusion transmission problem
with a trained dynamic interface flux surrogate."""

from .config import RunConfig
from .mesh import DomainSpec, SubdomainMesh, build_full_mesh, build_meshes, patch_indices
from .scenarios import (
    Scenario,
    combination_scenario,
    gaussian_training_set,
    patch_scenario,
    relative_errors,
)
from .solvers import (
    CoupledProblem,
    SchurSync,
    Trajectory,
    build_schur,
    euler_step,
    run_monolithic,
    run_partitioned,
    schur_sync,
)
from .surrogate import (
    DmdFluxOperator,
    DmdFluxSync,
    StaggeredLayout,
    collect_snapshots,
    rkoi,
    train_flux_operator,
)
from .opio import load_operator, save_operator

__version__ = "0.1.0"

__all__ = [
    "CoupledProblem",
    "DmdFluxOperator",
    "DmdFluxSync",
    "DomainSpec",
    "RunConfig",
    "Scenario",
    "SchurSync",
    "StaggeredLayout",
    "SubdomainMesh",
    "Trajectory",
    "build_full_mesh",
    "build_meshes",
    "build_schur",
    "collect_snapshots",
    "combination_scenario",
    "euler_step",
    "gaussian_training_set",
    "load_operator",
    "patch_indices",
    "patch_scenario",
    "relative_errors",
    "rkoi",
    "run_monolithic",
    "run_partitioned",
    "save_operator",
    "schur_sync",
    "train_flux_operator",
]
