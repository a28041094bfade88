"""Preconditioners for GMRES on the stochastic Galerkin system.

Each ``*_apply`` function maps a block residual ``r`` (shape
``(n_basis, n_x)``) to an approximation of ``K^{-1} r``; every one of them
is a fixed linear map.  :func:`make_preconditioner` binds the arguments and
returns a callable suitable for :func:`sgkit.krylov.gmres`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .relaxation import gauss_seidel_sweep, jacobi_sweep
from .sg_operator import as_blocks

__all__ = [
    "PRECONDITIONERS",
    "KroneckerG",
    "SingularGError",
    "mean_based_apply",
    "gs_precond_apply",
    "ags_precond_apply",
    "aj_precond_apply",
    "kronecker_precond_build",
    "kronecker_precond_apply",
    "make_preconditioner",
    "BoundPreconditioner",
    "trace_weights",
]

PRECONDITIONERS = ("MB", "GS", "AGS", "AJ", "KP")


class SingularGError(ArithmeticError):
    """The stochastic factor of the Kronecker preconditioner is singular."""


def _blocks(r, op=None, mean=None):
    r = np.asarray(r, dtype=float)
    if op is not None:
        return as_blocks(r, op.n_basis, op.n_x)
    return r.reshape(-1, mean.n_x)


def mean_based_apply(r, mean):
    """Block-diagonal ``diag(K_0, ..., K_0)^{-1} r``."""
    return mean.solve(_blocks(r, mean=mean)).reshape(np.shape(r))


def gs_precond_apply(r, op, mean, n_outer=1):
    """``n_outer`` Gauss-Seidel-mean sweeps on ``K z = r`` from ``z = 0``."""
    if n_outer < 1:
        raise ValueError("n_outer must be >= 1")
    R = _blocks(r, op)
    Z = R.copy()
    U = np.zeros_like(R)
    for _ in range(n_outer):
        gauss_seidel_sweep(op, R, U, Z, mean)
    return U.reshape(np.shape(r))


def ags_precond_apply(r, op_first_order, p0):
    """One Gauss-Seidel sweep of the first-order operator with ``p0`` as inner solve."""
    return gs_precond_apply(r, op_first_order, p0, n_outer=1)


def aj_precond_apply(r, op_first_order, p0, n_sweeps=2):
    """Jacobi sweeps (two by default) of the first-order operator from zero."""
    R = _blocks(r, op_first_order)
    U = np.zeros_like(R)
    for s in range(n_sweeps):
        # first sweep from zero has no coupling terms
        off = np.zeros_like(R) if s == 0 else None
        U = jacobi_sweep(op_first_order, R, U, p0, offdiag=off)
    return U.reshape(np.shape(r))


@dataclass
class KroneckerG:
    """Stochastic factor ``G = sum_i w_i G_i`` of ``G (x) K_0`` and its LU."""

    G: np.ndarray
    weights: np.ndarray
    lu: tuple = field(repr=False)


def trace_weights(matrices):
    """``w_i = tr(K_i^T K_0) / tr(K_0^T K_0)`` via elementwise products."""
    K0 = matrices[0]
    denom = K0.multiply(K0).sum()
    return np.array([K.multiply(K0).sum() / denom for K in matrices])


def kronecker_precond_build(op):
    w = trace_weights(op.matrices)
    G = np.zeros((op.n_basis, op.n_basis))
    for wi, Gi in zip(w, op.tensor.slices()):
        if wi != 0.0 and Gi.nnz:
            G += wi * Gi.toarray()
    if not np.all(np.isfinite(G)):
        raise SingularGError("non-finite entries in G")
    with warnings.catch_warnings():
        # singularity is detected from the pivots below and raised as SingularGError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(G, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * G.shape[0]:
        raise SingularGError("G is numerically singular")
    return KroneckerG(G=G, weights=w, lu=(lu, piv))


def kronecker_precond_apply(r, G, mean):
    """``(G^{-1} (x) K_0^{-1}) r``: blockwise mean solves, then ``G^{-1}`` across blocks."""
    Y = mean.solve(_blocks(r, mean=mean))
    Z = sla.lu_solve(G.lu, Y, check_finite=False)
    return Z.reshape(np.shape(r))


class BoundPreconditioner:
    """A preconditioner apply with its arguments bound.

    ``operators`` lists the Galerkin operators it multiplies with, so callers
    can read their matvec counters.
    """

    def __init__(self, kind, fn, operators=()):
        self.kind = kind
        self._fn = fn
        self.operators = tuple(operators)

    def __call__(self, r):
        return self._fn(r)

    def __repr__(self):
        return f"BoundPreconditioner({self.kind!r})"


def make_preconditioner(kind, op, mean, basis=None, n_outer=1):
    """Callable ``r -> M^{-1} r`` for one of ``MB, GS, AGS, AJ, KP``.

    ``basis`` (the coefficient basis) is required to pick the first-order
    terms of a PCE-mode operator for AGS and AJ.
    """
    kind = kind.upper()
    if kind == "MB":
        return BoundPreconditioner(kind, lambda r: mean_based_apply(r, mean))
    if kind == "GS":
        return BoundPreconditioner(
            kind, lambda r: gs_precond_apply(r, op, mean, n_outer=n_outer), [op]
        )
    if kind in ("AGS", "AJ"):
        op1 = op.first_order(basis)
        if kind == "AGS":
            return BoundPreconditioner(kind, lambda r: ags_precond_apply(r, op1, mean), [op1])
        return BoundPreconditioner(kind, lambda r: aj_precond_apply(r, op1, mean), [op1])
    if kind == "KP":
        G = kronecker_precond_build(op)
        bound = BoundPreconditioner(kind, lambda r: kronecker_precond_apply(r, G, mean))
        bound.G = G
        return bound
    raise ValueError(f"unknown preconditioner {kind!r}, expected one of {PRECONDITIONERS}")
