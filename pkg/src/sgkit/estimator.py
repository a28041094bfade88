"""scikit-learn style front end for solving Galerkin systems.

>>> from sgkit import StochasticGalerkinSolver, build_system
>>> system = build_system("uniform", M=2, p=2, mesh=(8, 8))
>>> est = StochasticGalerkinSolver(preconditioner="AGS").fit(system)
>>> samples = est.predict([[0.1, -0.4]])   # solution at one draw of the inputs
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_germ, check_positive, check_system
from .krylov import MeanSolver, gmres
from .pc_basis import eval_basis
from .preconditioners import PRECONDITIONERS, make_preconditioner
from .relaxation import RelaxConfig, gauss_seidel_solve, jacobi_solve

__all__ = ["StochasticGalerkinSolver", "SOLVERS"]

SOLVERS = ("gmres", "gauss_seidel", "jacobi")


class StochasticGalerkinSolver(BaseEstimator):
    """Solve ``K u = f`` for a stochastic Galerkin system.

    Parameters
    ----------
    solver : {"gmres", "gauss_seidel", "jacobi"}
    preconditioner : {"MB", "GS", "AGS", "AJ", "KP"} or None
        Only used by ``solver="gmres"``.
    tol : float
        Relative residual tolerance.
    max_iter : int
        GMRES iterations, or outer sweeps of the relaxation solvers.
    restart : int
        GMRES restart length.
    n_outer : int
        Sweeps of the Gauss-Seidel preconditioner.
    divergence_factor : float
        Relaxation solvers stop as diverged once the residual grows by this factor.
    n_jobs : int
        Threads for the independent inner solves of a Jacobi sweep.

    Attributes
    ----------
    coef_ : ndarray of shape (n_basis, n_x)
        Chaos coefficients of the discrete solution.
    report_ : SolveReport
    n_iter_ : int
    """

    def __init__(
        self,
        solver="gmres",
        preconditioner="AGS",
        tol=1e-12,
        max_iter=1000,
        restart=100,
        n_outer=1,
        divergence_factor=1e4,
        n_jobs=1,
    ):
        self.solver = solver
        self.preconditioner = preconditioner
        self.tol = tol
        self.max_iter = max_iter
        self.restart = restart
        self.n_outer = n_outer
        self.divergence_factor = divergence_factor
        self.n_jobs = n_jobs

    def _check_params(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.preconditioner is not None and self.preconditioner.upper() not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS} or None")
        check_positive("tol", self.tol)
        check_positive("max_iter", self.max_iter)

    def fit(self, system, y=None, mean_solver=None):
        """Solve the system; ``system`` is an ``SGSystem`` or ``(op, rhs[, basis])``."""
        self._check_params()
        op, rhs, basis = check_system(system)
        mean = mean_solver if mean_solver is not None else MeanSolver(op.matrices[0])
        if self.solver == "gmres":
            precond = None
            if self.preconditioner is not None:
                coeff_basis = getattr(system, "coeff_basis", None) or basis
                precond = make_preconditioner(
                    self.preconditioner, op, mean, coeff_basis, n_outer=self.n_outer
                )
            u, report = gmres(
                op, rhs, precond, tol=self.tol, max_iter=self.max_iter, restart=self.restart
            )
        else:
            cfg = RelaxConfig(
                tol=self.tol,
                max_outer=self.max_iter,
                divergence_factor=self.divergence_factor,
                n_jobs=self.n_jobs,
            )
            solve = gauss_seidel_solve if self.solver == "gauss_seidel" else jacobi_solve
            u, report = solve(op, rhs, cfg, mean)
        self.coef_ = u
        self.report_ = report
        self.n_iter_ = report.iterations
        self.converged_ = report.converged
        self.basis_ = basis
        return self

    def predict(self, xi):
        """Interior nodal solution for each row of input samples ``xi``.

        Samples are in the chaos family's native coordinates (uniform on
        [-1, 1] for Legendre, standard normal for Hermite).
        """
        check_is_fitted(self, "coef_")
        if self.basis_ is None:
            raise ValueError("fitted system carries no basis; cannot evaluate samples")
        xi = check_germ(xi, self.basis_.M)
        return eval_basis(self.basis_, xi) @ self.coef_

    def solution_mean(self):
        check_is_fitted(self, "coef_")
        return self.coef_[0].copy()

    def solution_variance(self):
        # orthonormal basis: variance is the sum of squared non-constant coefficients
        check_is_fitted(self, "coef_")
        return np.sum(self.coef_[1:] ** 2, axis=0)

    def residual(self, system):
        op, rhs, _ = check_system(system)
        check_is_fitted(self, "coef_")
        return float(np.linalg.norm(rhs - op.apply(self.coef_)) / np.linalg.norm(rhs))
