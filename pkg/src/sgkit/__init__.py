"""Stochastic Galerkin solvers for a 2-D advection-diffusion problem with a random diffusion coefficient."""
from .bench import ExperimentConfig, run_single, run_sweep
from .estimator import StochasticGalerkinSolver
from .fem2d import build_mesh
from .krylov import MeanSolver, SolveReport, gmres
from .pc_basis import build_basis, eval_basis, triple_products
from .preconditioners import make_preconditioner
from .problem import SGSystem, build_system
from .relaxation import RelaxConfig, gauss_seidel_solve, jacobi_solve
from .sg_operator import SGOperator

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "MeanSolver",
    "RelaxConfig",
    "SGOperator",
    "SGSystem",
    "SolveReport",
    "StochasticGalerkinSolver",
    "build_basis",
    "build_mesh",
    "build_system",
    "eval_basis",
    "gauss_seidel_solve",
    "gmres",
    "jacobi_solve",
    "make_preconditioner",
    "run_single",
    "run_sweep",
    "triple_products",
]
