"""Input checks shared by the estimator and the benchmark harness."""
from __future__ import annotations

import numpy as np

from .sg_operator import SGOperator


def check_system(system):
    """Return ``(op, rhs, basis)`` from an ``SGSystem`` or an ``(op, rhs[, basis])`` tuple."""
    if hasattr(system, "op") and hasattr(system, "rhs"):
        op, rhs, basis = system.op, system.rhs, getattr(system, "basis", None)
    elif isinstance(system, tuple) and len(system) in (2, 3):
        op, rhs = system[:2]
        basis = system[2] if len(system) == 3 else None
    else:
        raise TypeError("expected an SGSystem or a tuple (operator, rhs[, basis])")
    if not isinstance(op, SGOperator):
        raise TypeError(f"operator must be an SGOperator, got {type(op).__name__}")
    rhs = check_block_vector(rhs, op)
    return op, rhs, basis


def check_block_vector(u, op):
    u = np.asarray(u, dtype=float)
    if u.size != op.n_basis * op.n_x:
        raise ValueError(
            f"block vector has {u.size} entries, operator expects {op.n_basis} x {op.n_x}"
        )
    if not np.all(np.isfinite(u)):
        raise ValueError("block vector contains non-finite values")
    return u.reshape(op.n_basis, op.n_x)


def check_germ(xi, M):
    """Samples of the random inputs as a 2-D array of shape (n_samples, M)."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi.reshape(1, -1) if xi.size == M else xi.reshape(-1, 1)
    if xi.ndim != 2 or xi.shape[1] != M:
        raise ValueError(f"expected samples with {M} columns, got shape {xi.shape}")
    return xi


def check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
