"""Jacobi-mean and Gauss-Seidel-mean outer solvers.

Both use the mean splitting: every inner solve is with ``c_0kk K_0`` and
only right-hand sides change, so one factorization of ``K_0`` serves all
inner solves.  The initial guess is zero.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .krylov import SolveReport
from .sg_operator import as_blocks

__all__ = [
    "RelaxConfig",
    "jacobi_sweep",
    "gauss_seidel_sweep",
    "jacobi_solve",
    "gauss_seidel_solve",
]

log = logging.getLogger(__name__)


@dataclass
class RelaxConfig:
    """Outer-iteration controls.

    ``inner_tol`` is informational: inner solves are direct and exceed it.
    A run is declared diverged when the relative residual exceeds
    ``divergence_factor`` times its initial value or becomes non-finite.
    """

    tol: float = 1e-12
    inner_tol: float = 3e-13
    max_outer: int = 2000
    divergence_factor: float = 1e4
    check_every: int = 10
    drift_tol: float = 1e-10
    n_jobs: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.divergence_factor > 1:
            raise ValueError("divergence_factor must exceed 1")


def jacobi_sweep(op, f, U, mean, n_jobs=1, offdiag=None):
    """One Jacobi-mean sweep: solve ``c_0kk K_0 u_k = f_k - sum_{i>=1} c_ijk K_i u_j``.

    ``offdiag`` may carry a precomputed ``op.apply(U, include_mean=False)``.
    """
    if offdiag is None:
        offdiag = op.apply(U, include_mean=False)
    return mean.solve_blocks(f - offdiag, scales=op.mean_diagonal, n_jobs=n_jobs)


def gauss_seidel_sweep(op, f, U, Z, mean, R=None):
    """One forward Gauss-Seidel-mean sweep, updating ``U`` and ``Z`` in place.

    ``Z`` holds the working right-hand sides: on entry ``Z_k`` must equal
    ``f_k`` minus the ``i >= 1`` coupling terms from blocks ``j >= k`` of the
    current iterate (``Z = f`` for a zero iterate; a previous sweep leaves
    exactly this state behind).  After
    each block solve, ``K_i u_k`` is formed once per coefficient index ``i``
    with a nonzero fiber and scattered into every affected ``Z_j`` (and
    ``R_j`` when a residual accumulator is given, which must equal ``f`` on
    entry).
    """
    d = op.mean_diagonal
    K = op.matrices
    for k in range(op.n_basis):
        U[k] = mean.solve(Z[k]) / d[k]
        Z[k] = f[k]
        for i, js, cs in op.source_terms(k):
            y = K[i] @ U[k]
            op.matvec_count += 1
            Z[js] -= cs[:, None] * y
            if R is not None:
                R[js] -= cs[:, None] * y
        if R is not None:
            R[k] -= d[k] * (K[0] @ U[k])
            op.matvec_count += 1
    return U


def _relres(R, fnorm):
    return float(np.linalg.norm(R) / fnorm)


def _start(op, f, cfg, method):
    F = as_blocks(f, op.n_basis, op.n_x)
    fnorm = np.linalg.norm(F)
    return F, fnorm, SolveReport(method=method)


def _finish(report, op, mean, mv0, is0, t0):
    report.matvec_count = op.matvec_count - mv0
    report.inner_solve_count = mean.inner_solve_count - is0
    report.wall_time = time.perf_counter() - t0
    return report


def _diverging(res, res0, cfg):
    return not np.isfinite(res) or res > cfg.divergence_factor * res0


def jacobi_solve(op, f, cfg=None, mean=None):
    """Jacobi-mean iteration to ``||f - K u|| / ||f|| <= cfg.tol``.

    Returns ``(u, report)`` with ``u`` shaped like ``f``.
    """
    cfg = cfg or RelaxConfig()
    if mean is None:
        from .krylov import MeanSolver

        mean = MeanSolver(op.matrices[0])
    t0, mv0, is0 = time.perf_counter(), op.matvec_count, mean.inner_solve_count
    F, fnorm, report = _start(op, f, cfg, "jacobi")
    U = op.zeros()
    if fnorm == 0:
        report.converged = True
        report.residual_history = [0.0]
        return U.reshape(np.shape(f)), _finish(report, op, mean, mv0, is0, t0)
    offdiag = np.zeros_like(U)
    res0 = 1.0
    report.residual_history.append(res0)
    res = res0
    while res > cfg.tol and report.iterations < cfg.max_outer:
        U = jacobi_sweep(op, F, U, mean, n_jobs=cfg.n_jobs, offdiag=offdiag)
        report.iterations += 1
        # full residual f - K u = f - offdiag(u) - mean(u); offdiag(u) is reused next sweep
        offdiag = op.apply(U, include_mean=False)
        res = _relres(F - offdiag - op.mean_apply(U), fnorm)
        report.residual_history.append(res)
        if _diverging(res, res0, cfg):
            report.diverged = True
            break
    report.converged = res <= cfg.tol
    return U.reshape(np.shape(f)), _finish(report, op, mean, mv0, is0, t0)


def gauss_seidel_solve(op, f, cfg=None, mean=None):
    """Gauss-Seidel-mean iteration with the incremental residual of the sweep.

    Every ``cfg.check_every`` sweeps the incremental residual is compared
    with a full operator apply and replaced if they drift apart by more than
    ``cfg.drift_tol`` (relative to ``||f||``).
    """
    cfg = cfg or RelaxConfig()
    if mean is None:
        from .krylov import MeanSolver

        mean = MeanSolver(op.matrices[0])
    t0, mv0, is0 = time.perf_counter(), op.matvec_count, mean.inner_solve_count
    F, fnorm, report = _start(op, f, cfg, "gauss_seidel")
    U = op.zeros()
    if fnorm == 0:
        report.converged = True
        report.residual_history = [0.0]
        return U.reshape(np.shape(f)), _finish(report, op, mean, mv0, is0, t0)
    Z = F.copy()
    res0 = 1.0
    report.residual_history.append(res0)
    res = res0
    while res > cfg.tol and report.iterations < cfg.max_outer:
        R = F.copy()
        gauss_seidel_sweep(op, F, U, Z, mean, R=R)
        report.iterations += 1
        if cfg.check_every and report.iterations % cfg.check_every == 0:
            R_true = F - op.apply(U)
            drift = np.linalg.norm(R - R_true) / fnorm
            if drift > cfg.drift_tol:
                log.warning("incremental residual drifted by %.3e; resynchronizing", drift)
                R = R_true
        res = _relres(R, fnorm)
        report.residual_history.append(res)
        if _diverging(res, res0, cfg):
            report.diverged = True
            break
    report.converged = res <= cfg.tol
    return U.reshape(np.shape(f)), _finish(report, op, mean, mv0, is0, t0)
