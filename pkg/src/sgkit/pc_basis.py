"""Total-order orthonormal polynomial chaos bases and triple-product tensors.

Two families are supported: ``"legendre"`` (orthonormal w.r.t. the uniform
density 1/2 on [-1, 1] per dimension) and ``"hermite"`` (orthonormal
probabilists' Hermite polynomials w.r.t. the standard Gaussian).

Multi-indices are kept in graded lexicographic order: grouped by total
degree, and inside a degree group sorted so that earlier dimensions carry
the larger exponents, e.g. for M=2::

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...

With this ordering the first-order index ``e_i`` sits at position ``i``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import hermite_e, legendre

__all__ = [
    "ORDERING_VERSION",
    "FAMILIES",
    "BasisSizeError",
    "MultiIndexBasis",
    "TripleProductTensor",
    "basis_size",
    "build_basis",
    "eval_basis",
    "eval_1d",
    "gauss_rule",
    "triple_products",
    "export_tensor",
]

ORDERING_VERSION = "grlex-v1"
FAMILIES = ("legendre", "hermite")
MAX_BASIS_SIZE = 1_000_000


class BasisSizeError(ValueError):
    """Raised when a requested basis would be unreasonably large."""


def basis_size(M, p):
    """Number of total-order multi-indices, (M+p)!/(M!p!)."""
    return math.comb(M + p, p)


def _check_family(family):
    family = str(family).lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown polynomial family {family!r}, expected one of {FAMILIES}")
    return family


def _graded_indices(M, p):
    out = []
    for degree in range(p + 1):
        # compositions of `degree` into M parts, reverse-lex so (d,0,..) comes first
        group = [
            c for c in itertools.product(range(degree, -1, -1), repeat=M) if sum(c) == degree
        ]
        out.extend(group)
    return np.array(out, dtype=np.int64).reshape(-1, M)


@dataclass(frozen=True)
class MultiIndexBasis:
    """Total-order orthonormal polynomial basis in ``M`` variables.

    Attributes
    ----------
    M : int
        Stochastic dimension.
    p : int
        Total polynomial order.
    family : str
        ``"legendre"`` or ``"hermite"``.
    indices : ndarray of shape (size, M)
        Multi-indices in graded lexicographic order.
    """

    M: int
    p: int
    family: str
    indices: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.indices.shape[0]

    def __len__(self):
        return self.size

    @property
    def total_degrees(self):
        return self.indices.sum(axis=1)

    def first_order(self):
        """Positions of the multi-indices with total degree <= 1."""
        return np.flatnonzero(self.total_degrees <= 1)

    def position(self, multi_index):
        multi_index = np.asarray(multi_index)
        hits = np.flatnonzero((self.indices == multi_index).all(axis=1))
        if hits.size == 0:
            raise KeyError(tuple(multi_index.tolist()))
        return int(hits[0])


def build_basis(M, p, family="legendre"):
    """Build a total-order basis with ``(M+p)!/(M!p!)`` terms."""
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    if int(p) != p or p < 0:
        raise ValueError(f"p must be a non-negative integer, got {p!r}")
    M, p = int(M), int(p)
    family = _check_family(family)
    n = basis_size(M, p)
    if n > MAX_BASIS_SIZE:
        raise BasisSizeError(f"basis with M={M}, p={p} has {n} terms (limit {MAX_BASIS_SIZE})")
    indices = _graded_indices(M, p)
    indices.setflags(write=False)
    return MultiIndexBasis(M=M, p=p, family=family, indices=indices)


def eval_1d(family, degree, x):
    """Orthonormal 1-D polynomials of degree 0..``degree`` at ``x``.

    Returns an array of shape ``x.shape + (degree + 1,)``.
    """
    family = _check_family(family)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree == 0:
        return out
    out[..., 1] = x
    # three-term recurrences of the monic/standard families, normalized afterwards
    for n in range(1, degree):
        if family == "legendre":
            out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
        else:
            out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
    n = np.arange(degree + 1)
    if family == "legendre":
        scale = np.sqrt(2 * n + 1.0)
    else:
        scale = 1.0 / np.sqrt([math.factorial(int(k)) for k in n])
    return out * scale


def gauss_rule(family, n_points):
    """Gauss rule for the family's probability measure (weights sum to 1)."""
    family = _check_family(family)
    if family == "legendre":
        x, w = legendre.leggauss(n_points)
        return x, w / 2.0
    x, w = hermite_e.hermegauss(n_points)
    return x, w / math.sqrt(2.0 * math.pi)


def eval_basis(basis, point):
    """Evaluate every basis polynomial at ``point``.

    ``point`` may be a single vector of length M or an array of shape
    (n_points, M); the result has a trailing axis of length ``basis.size``.
    """
    point = np.asarray(point, dtype=float)
    single = point.ndim == 1
    pts = np.atleast_2d(point)
    if pts.shape[-1] != basis.M:
        raise ValueError(f"point has dimension {pts.shape[-1]}, basis expects {basis.M}")
    vals = eval_1d(basis.family, basis.p, pts)  # (n, M, p+1)
    out = np.ones((pts.shape[0], basis.size))
    for d in range(basis.M):
        out *= vals[:, d, basis.indices[:, d]]
    return out[0] if single else out


@dataclass(frozen=True)
class TripleProductTensor:
    """Sparse tensor ``c[i, j, k]`` stored in coordinate form.

    ``i`` runs over the coefficient index (``P_hat + 1`` values) and ``j, k``
    over the solution basis.
    """

    shape: tuple
    i: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    mode: str = "pce"
    M: int = 0
    p: int = 0
    family: str = "legendre"

    @property
    def nnz(self):
        return self.values.size

    @property
    def P_hat(self):
        return self.shape[0] - 1

    @property
    def n_basis(self):
        return self.shape[1]

    def slices(self):
        """List of sparse ``(n_basis, n_basis)`` matrices ``G_i(j, k) = c_ijk``."""
        cached = self.__dict__.get("_slices")
        if cached is None:
            nb = self.n_basis
            cached = []
            for i in range(self.shape[0]):
                sel = self.i == i
                cached.append(
                    sp.csr_matrix((self.values[sel], (self.j[sel], self.k[sel])), shape=(nb, nb))
                )
            object.__setattr__(self, "_slices", cached)
        return cached

    def get(self, i, j, k):
        hit = np.flatnonzero((self.i == i) & (self.j == j) & (self.k == k))
        return float(self.values[hit[0]]) if hit.size else 0.0

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.i, self.j, self.k] = self.values
        return out

    def restrict(self, keep):
        """Tensor with entries for coefficient indices outside ``keep`` removed."""
        mask = np.isin(self.i, np.asarray(list(keep)))
        return TripleProductTensor(
            shape=self.shape,
            i=self.i[mask],
            j=self.j[mask],
            k=self.k[mask],
            values=self.values[mask],
            mode=self.mode,
            M=self.M,
            p=self.p,
            family=self.family,
        )


def triple_products(basis, mode="pce", P_hat=None, drop_tol=1e-12, coeff_basis=None, n_quad=None):
    """Compute the triple-product tensor of ``basis``.

    Parameters
    ----------
    basis : MultiIndexBasis
        Solution basis (indices ``j`` and ``k``).
    mode : {"kl", "pce"}
        ``"kl"``: ``c_ijk = E[xi_i psi_j psi_k]`` with ``xi_0 = 1`` and
        ``xi_i`` the unit-variance first-order polynomial in dimension ``i``,
        so ``P_hat`` must equal ``M``.  ``"pce"``: ``c_ijk = E[psi_i psi_j
        psi_k]`` with ``psi_i`` taken from ``coeff_basis`` (defaults to
        ``basis``).
    P_hat : int, optional
        Largest coefficient index. Defaults to ``M`` (KL) or
        ``coeff_basis.size - 1`` (PCE).
    drop_tol : float
        Entries with ``|c| <= drop_tol`` are not stored.
    coeff_basis : MultiIndexBasis, optional
        Basis of the coefficient expansion in PCE mode (may have a larger
        order than ``basis``).
    n_quad : int, optional
        Override of the number of 1-D Gauss points; the default
        ``ceil((3 * p_max + 1) / 2)`` integrates every integrand exactly.
    """
    mode = str(mode).lower()
    if mode == "kl":
        if P_hat is None:
            P_hat = basis.M
        if P_hat != basis.M:
            raise ValueError(f"KL mode requires P_hat == M ({basis.M}), got {P_hat}")
        coeff_idx = np.zeros((basis.M + 1, basis.M), dtype=np.int64)
        coeff_idx[1:] = np.eye(basis.M, dtype=np.int64)
    elif mode == "pce":
        cb = basis if coeff_basis is None else coeff_basis
        if cb.M != basis.M or cb.family != basis.family:
            raise ValueError("coefficient basis must share M and family with the solution basis")
        if P_hat is None:
            P_hat = cb.size - 1
        if not 0 <= P_hat <= cb.size - 1:
            raise ValueError(f"P_hat={P_hat} outside coefficient basis of size {cb.size}")
        coeff_idx = cb.indices[: P_hat + 1]
    else:
        raise ValueError(f"mode must be 'kl' or 'pce', got {mode!r}")

    sol_idx = basis.indices
    deg_c = int(coeff_idx.max(initial=0))
    deg_s = int(sol_idx.max(initial=0))
    p_max = max(deg_c, deg_s)
    if n_quad is None:
        n_quad = max(1, math.ceil((3 * p_max + 1) / 2))
    x, w = gauss_rule(basis.family, n_quad)
    phi = eval_1d(basis.family, p_max, x)  # (n_quad, p_max + 1)
    table = np.einsum("q,qa,qb,qc->abc", w, phi, phi, phi)
    # a zero index reduces the entry to an inner product of orthonormal
    # polynomials: store it exactly so c_0jk is exactly the identity
    eye = np.eye(p_max + 1)
    table[0], table[:, 0], table[:, :, 0] = eye, eye, eye

    n_i, nb = coeff_idx.shape[0], sol_idx.shape[0]
    dense = np.ones((n_i, nb, nb))
    for d in range(basis.M):
        dense *= table[np.ix_(coeff_idx[:, d], sol_idx[:, d], sol_idx[:, d])]
    # exact j<->k symmetry regardless of rounding in the product order
    dense = 0.5 * (dense + dense.transpose(0, 2, 1))
    ii, jj, kk = np.nonzero(np.abs(dense) > drop_tol)
    return TripleProductTensor(
        shape=(n_i, nb, nb),
        i=ii,
        j=jj,
        k=kk,
        values=dense[ii, jj, kk],
        mode=mode,
        M=basis.M,
        p=basis.p,
        family=basis.family,
    )


def export_tensor(tensor, path):
    """Write the nonzeros as ``i j k value`` lines under a ``# M p family mode`` header."""
    with open(path, "w") as fh:
        fh.write(f"# {tensor.M} {tensor.p} {tensor.family} {tensor.mode}\n")
        fh.write(f"# ordering {ORDERING_VERSION}\n")
        for i, j, k, v in zip(tensor.i, tensor.j, tensor.k, tensor.values):
            fh.write(f"{i} {j} {k} {v:.17g}\n")


def read_tensor(path):
    """Inverse of :func:`export_tensor`; returns ``(header, i, j, k, values)``."""
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                if header is None:
                    M, p, family, mode = line[1:].split()
                    header = {"M": int(M), "p": int(p), "family": family, "mode": mode}
                continue
            rows.append(line.split())
    arr = np.array(rows, dtype=object).reshape(-1, 4)
    ijk = arr[:, :3].astype(np.int64)
    vals = arr[:, 3].astype(float)
    return header, ijk[:, 0], ijk[:, 1], ijk[:, 2], vals
