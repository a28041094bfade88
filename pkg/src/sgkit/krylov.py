"""Right-preconditioned restarted GMRES and the reusable mean solver."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "MeanSolver",
    "SingularMeanError",
    "SolveReport",
    "gmres",
    "mean_solver_build",
    "write_history_csv",
]


class SingularMeanError(ArithmeticError):
    """The mean matrix could not be factorized."""


@dataclass
class SolveReport:
    """Outcome of an iterative solve.

    ``residual_history[0]`` is the initial relative residual and the list
    has ``iterations + 1`` entries.
    """

    method: str = ""
    converged: bool = False
    diverged: bool = False
    breakdown: bool = False
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    operator_applies: int = 0
    matvec_count: int = 0
    inner_solve_count: int = 0
    wall_time: float = 0.0

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")


class MeanSolver:
    """Sparse LU of ``scale * K_0``, factorized once and reused for every solve.

    ``solve`` accepts a single vector or a block array of shape
    ``(n_blocks, n_x)``; every block counts as one inner solve.
    """

    def __init__(self, K0, scale=1.0):
        if scale == 0:
            raise ValueError("scale must be nonzero")
        self.scale = float(scale)
        self.n_x = K0.shape[0]
        A = sp.csc_matrix(K0, dtype=float) * self.scale
        try:
            self._lu = splu(A)
        except RuntimeError as exc:
            raise SingularMeanError(str(exc)) from exc
        if not np.all(np.isfinite(self._lu.U.diagonal())) or np.any(self._lu.U.diagonal() == 0):
            raise SingularMeanError("mean matrix is singular")
        self.factorization_count = 1
        self.inner_solve_count = 0

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            self.inner_solve_count += 1
            return self._lu.solve(b)
        self.inner_solve_count += b.shape[0]
        return self._lu.solve(np.ascontiguousarray(b.T)).T

    def solve_blocks(self, B, scales=None, n_jobs=1):
        """Solve each block row of ``B``, dividing block ``k`` by ``scales[k]``.

        With ``n_jobs > 1`` the blocks are split into contiguous chunks solved
        in a thread pool; each output row is written by exactly one task so
        the result is identical to the serial path.
        """
        B = np.asarray(B, dtype=float)
        if n_jobs is None or n_jobs <= 1 or B.shape[0] < 2:
            X = self.solve(B)
        else:
            from concurrent.futures import ThreadPoolExecutor

            X = np.empty_like(B)
            chunks = np.array_split(np.arange(B.shape[0]), min(n_jobs, B.shape[0]))

            def work(rows):
                X[rows] = self._lu.solve(np.ascontiguousarray(B[rows].T)).T

            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                list(pool.map(work, chunks))
            self.inner_solve_count += B.shape[0]
        if scales is not None:
            X = X / np.asarray(scales)[:, None]
        return X


def mean_solver_build(K0, scale=1.0):
    return MeanSolver(K0, scale)


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(op, b, precond=None, tol=1e-12, max_iter=1000, restart=100, x0=None, callback=None):
    """Right-preconditioned GMRES(restart).

    Solves ``op(x) = b`` by minimizing ``||b - op(M^{-1} y)||`` over Krylov
    spaces of ``op o M^{-1}``, so the monitored residual is the residual of
    the original system.  Arnoldi uses modified Gram-Schmidt with one
    reorthogonalization pass.

    Parameters
    ----------
    op, precond : callables
        Linear maps on arrays shaped like ``b``; ``precond`` applies
        ``M^{-1}`` (identity if None).
    tol : float
        Relative residual target ``||b - op(x)|| / ||b||``.
    max_iter : int
        Total Arnoldi steps across restarts.
    restart : int or None
        Krylov dimension per cycle (None for no restart).

    Returns
    -------
    x : ndarray shaped like ``b``
    report : SolveReport
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    shape = b.shape
    bf = b.ravel()
    report = SolveReport(method="gmres")
    bnorm = np.linalg.norm(bf)
    if bnorm == 0.0:
        report.converged = True
        report.residual_history = [0.0]
        report.wall_time = time.perf_counter() - t0
        return np.zeros(shape), report

    def A(v):
        report.operator_applies += 1
        # copy: Arnoldi updates the result in place and op may return its input
        return np.array(op(v.reshape(shape)), dtype=float).ravel()

    def Minv(v):
        if precond is None:
            return v
        return np.asarray(precond(v.reshape(shape)), dtype=float).ravel()

    x = np.zeros_like(bf) if x0 is None else np.array(x0, dtype=float).ravel()
    r = bf - A(x) if x0 is not None else bf.copy()
    beta = np.linalg.norm(r)
    report.residual_history.append(beta / bnorm)
    m = max_iter if restart is None else max(1, min(restart, max_iter))
    breakdown_tol = 1e-14 * bnorm
    n_total = 0

    while True:
        if beta / bnorm <= tol:
            report.converged = True
            break
        if n_total >= max_iter:
            break
        V = [r / beta]
        Z = []
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        j_done = 0
        happy = False
        for j in range(m):
            Z.append(Minv(V[j]))
            w = A(Z[j])
            for _ in range(2):
                for i in range(j + 1):
                    hij = V[i] @ w
                    H[i, j] += hij
                    w -= hij * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            happy = H[j + 1, j] < breakdown_tol
            if not happy:
                V.append(w / H[j + 1, j])
            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hi1
                H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            n_total += 1
            j_done = j + 1
            report.residual_history.append(abs(g[j + 1]) / bnorm)
            if callback is not None:
                callback(abs(g[j + 1]) / bnorm)
            if happy or abs(g[j + 1]) / bnorm <= tol or n_total >= max_iter:
                break
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done]) if j_done else np.zeros(0)
        for i in range(j_done):
            x += y[i] * Z[i]
        r = bf - A(x)
        beta = np.linalg.norm(r)
        if happy:
            report.breakdown = True
            report.converged = beta / bnorm <= tol
            break
    report.converged = report.converged or beta / bnorm <= tol
    report.iterations = n_total
    report.wall_time = time.perf_counter() - t0
    return x.reshape(shape), report


def write_history_csv(report, path):
    """Write ``iter, relres`` rows for one solve."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "relres"])
        for it, rr in enumerate(report.residual_history):
            w.writerow([it, repr(float(rr))])
