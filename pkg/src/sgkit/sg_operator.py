"""Matrix-free stochastic Galerkin operator.

Block vectors are ``(n_basis, n_x)`` arrays (block-major, each block a
contiguous row); flat vectors of length ``n_basis * n_x`` are accepted and
returned flat.

The operator computes ``v_k = sum_j sum_i c_ijk K_i u_j``.  For each
coefficient index ``i`` only the blocks ``u_j`` with a nonzero fiber
``c_ij.`` are multiplied by ``K_i``, and each product ``K_i u_j`` is scattered
into every ``v_k`` it contributes to, so the number of sparse matvecs per
apply equals the number of distinct ``(i, j)`` fibers.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

__all__ = ["SGOperator", "as_blocks", "DENSE_ORACLE_LIMIT"]

DENSE_ORACLE_LIMIT = 20000


def as_blocks(u, n_basis, n_x):
    """View ``u`` as an ``(n_basis, n_x)`` block array."""
    u = np.asarray(u, dtype=float)
    if u.size != n_basis * n_x:
        raise ValueError(f"vector of size {u.size} does not match {n_basis} blocks of {n_x}")
    return u.reshape(n_basis, n_x)


class SGOperator:
    """Global Galerkin operator built from ``{K_i}`` and a triple-product tensor.

    Parameters
    ----------
    matrices : sequence of sparse matrices
        ``K_0, ..., K_P``, all ``n_x`` x ``n_x``.
    tensor : TripleProductTensor
        Entries ``c_ijk``; ``tensor.shape[0]`` must equal ``len(matrices)``.

    Attributes
    ----------
    matvec_count : int
        Running total of sparse ``K_i @ u_j`` products (instrumentation).
    """

    def __init__(self, matrices, tensor):
        matrices = [sp.csr_matrix(K) for K in matrices]
        if len(matrices) != tensor.shape[0]:
            raise ValueError(
                f"{len(matrices)} matrices given for a tensor with P_hat+1={tensor.shape[0]}"
            )
        n_x = matrices[0].shape[0]
        for K in matrices:
            if K.shape != (n_x, n_x):
                raise ValueError("all K_i must be square and of equal size")
        self.matrices = matrices
        self.tensor = tensor
        self.n_x = n_x
        self.n_basis = tensor.shape[1]
        self.matvec_count = 0
        self._build_fibers()

    def _build_fibers(self):
        # per i: the blocks j with a nonzero fiber and the (|J_i|, n_basis) coefficient slab
        self._fibers = []
        for i, G in enumerate(self.tensor.slices()):
            js = np.unique(G.nonzero()[0])
            if js.size:
                self._fibers.append((i, js, G[js].tocsr()))
        # transposed view, used by Gauss-Seidel sweeps: for each source block k,
        # the coefficient indices i >= 1 with targets j and weights c_ikj
        self._by_source = [[] for _ in range(self.n_basis)]
        for i, G in enumerate(self.tensor.slices()):
            if i == 0:
                continue
            G = G.tocsr()
            for k in range(self.n_basis):
                lo, hi = G.indptr[k], G.indptr[k + 1]
                if hi > lo:
                    self._by_source[k].append((i, G.indices[lo:hi].copy(), G.data[lo:hi].copy()))
        self.mean_diagonal = self.tensor.slices()[0].diagonal()

    @property
    def shape(self):
        n = self.n_basis * self.n_x
        return (n, n)

    @property
    def P_hat(self):
        return len(self.matrices) - 1

    def n_fibers(self, include_mean=True):
        """Number of distinct ``(i, j)`` pairs with a nonzero fiber."""
        return sum(js.size for i, js, _ in self._fibers if include_mean or i > 0)

    def source_terms(self, k):
        """``[(i, targets, coefficients), ...]`` for ``i >= 1`` fed by block ``k``."""
        return self._by_source[k]

    def apply(self, u, include_mean=True, out=None):
        """Matrix-free product; ``include_mean=False`` drops the ``i = 0`` term."""
        flat = np.ndim(u) == 1
        U = as_blocks(u, self.n_basis, self.n_x)
        V = np.zeros_like(U) if out is None else as_blocks(out, self.n_basis, self.n_x)
        if out is not None:
            V[...] = 0.0
        for i, js, C in self._fibers:
            if i == 0 and not include_mean:
                continue
            Y = (self.matrices[i] @ U[js].T).T  # (|J_i|, n_x)
            self.matvec_count += js.size
            V += C.T @ Y
        return V.ravel() if flat else V

    __call__ = apply

    def mean_apply(self, u):
        """Block-diagonal mean part ``c_0kk K_0 u_k``."""
        U = as_blocks(u, self.n_basis, self.n_x)
        V = (self.matrices[0] @ U.T).T * self.mean_diagonal[:, None]
        self.matvec_count += self.n_basis
        return V.ravel() if np.ndim(u) == 1 else V

    def restrict(self, keep):
        """Operator keeping only the coefficient indices in ``keep``.

        The matrix list keeps its length so coefficient indices stay aligned.
        """
        return SGOperator(self.matrices, self.tensor.restrict(keep))

    def first_order(self, basis=None):
        """Operator restricted to the mean and first-order coefficient terms."""
        if self.tensor.mode == "kl":
            return self
        if basis is None:
            raise ValueError("PCE-mode restriction needs the coefficient basis")
        keep = [i for i in basis.first_order() if i <= self.P_hat]
        return self.restrict(keep)

    def block_sparsity(self):
        """Boolean ``(n_basis, n_basis)`` pattern: True where some ``c_ijk != 0``."""
        pattern = np.zeros((self.n_basis, self.n_basis), dtype=bool)
        pattern[self.tensor.j, self.tensor.k] = True
        return pattern

    def assemble_explicit(self):
        """Dense global matrix (row block ``k``, column block ``j``); small systems only."""
        n = self.n_basis * self.n_x
        if n > DENSE_ORACLE_LIMIT:
            raise ValueError(f"explicit assembly of size {n} exceeds the oracle limit")
        A = np.zeros((n, n))
        dense_K = [K.toarray() for K in self.matrices]
        nx = self.n_x
        t = self.tensor
        for i, j, k, c in zip(t.i, t.j, t.k, t.values):
            A[k * nx : (k + 1) * nx, j * nx : (j + 1) * nx] += c * dense_K[i]
        return A

    def aslinearoperator(self):
        return LinearOperator(self.shape, matvec=lambda x: self.apply(np.ravel(x)), dtype=float)

    def zeros(self):
        return np.zeros((self.n_basis, self.n_x))

    def rhs_from_load(self, load):
        """Block right-hand side of a deterministic load (only block 0 nonzero)."""
        f = self.zeros()
        f[0] = load
        return f
