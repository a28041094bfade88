"""Bilinear (Q1) finite elements on a structured rectangular grid.

Node ``(ix, iy)`` has global index ``iy * (nx + 1) + ix``.  Dirichlet
conditions (homogeneous) are imposed by elimination, so every assembled
matrix and vector lives on interior nodes only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "build_mesh",
    "assemble_diffusion",
    "assemble_advection",
    "assemble_mass",
    "assemble_load",
    "assemble_Ki_family",
    "export_matrix_market",
    "interior_to_full",
]

# 2x2 Gauss points on the reference square [-1, 1]^2
_G = 1.0 / np.sqrt(3.0)
_QP = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _shape(qp):
    # N[q, a] and dN/dxi[q, a, 2] on the reference square
    s, t = qp[:, 0:1], qp[:, 1:2]
    N = 0.25 * (1 + s * _REF[:, 0]) * (1 + t * _REF[:, 1])
    dNs = 0.25 * _REF[:, 0] * (1 + t * _REF[:, 1])
    dNt = 0.25 * _REF[:, 1] * (1 + s * _REF[:, 0])
    return N, np.stack([dNs, dNt], axis=-1)


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor grid of 4-node quadrilaterals."""

    nx: int
    ny: int
    domain: tuple
    nodes: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)
    interior_nodes: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_interior(self):
        return self.interior_nodes.size

    @property
    def h(self):
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) / self.nx, (y1 - y0) / self.ny

    def jacobian_determinants(self):
        hx, hy = self.h
        return np.full(self.n_elements, hx * hy / 4.0)

    def node_weights(self):
        """Quadrature weights on the nodes (composite Simpson where possible).

        Simpson's rule is used along an axis with an even number of cells,
        the trapezoid rule otherwise.
        """
        (x0, x1), (y0, y1) = self.domain
        wx = _composite_weights(self.nx, (x1 - x0) / self.nx)
        wy = _composite_weights(self.ny, (y1 - y0) / self.ny)
        return np.outer(wy, wx).ravel()


def _composite_weights(n, h):
    if n % 2 == 0:
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    w = np.full(n + 1, h)
    w[[0, -1]] = h / 2
    return w


def build_mesh(nx, ny, domain=((-0.5, 0.5), (-0.5, 0.5))):
    """Structured ``nx`` x ``ny`` quadrilateral mesh of a rectangle."""
    if nx < 2 or ny < 2:
        raise ValueError(f"need at least 2 cells per axis, got {nx}x{ny}")
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ll = (iy * (nx + 1) + ix).ravel()
    elements = np.column_stack([ll, ll + 1, ll + nx + 2, ll + nx + 1])
    gx, gy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    on_bnd = ((gx == 0) | (gx == nx) | (gy == 0) | (gy == ny)).ravel()
    for arr in (nodes, elements):
        arr.setflags(write=False)
    return Mesh(
        nx=int(nx),
        ny=int(ny),
        domain=((float(x0), float(x1)), (float(y0), float(y1))),
        nodes=nodes,
        elements=elements,
        boundary_nodes=np.flatnonzero(on_bnd),
        interior_nodes=np.flatnonzero(~on_bnd),
    )


def _geometry(mesh):
    hx, hy = mesh.h
    N, dN = _shape(_QP)
    # physical gradients: d/dx = (2/hx) d/ds, d/dy = (2/hy) d/dt
    grad = dN * np.array([2.0 / hx, 2.0 / hy])
    detJ = hx * hy / 4.0
    return N, grad, detJ


def _scatter(mesh, ke, eliminate=True):
    rows = np.repeat(mesh.elements, 4, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 4)).ravel()
    A = sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    A.sum_duplicates()
    if eliminate:
        A = A[mesh.interior_nodes][:, mesh.interior_nodes].tocsr()
    A.sort_indices()
    return A


def element_diffusion(mesh, coeff_nodal):
    """Element matrices ``int a grad(phi_b) . grad(phi_a)`` of shape (n_elements, 4, 4)."""
    N, grad, detJ = _geometry(mesh)
    a_q = coeff_nodal[mesh.elements] @ N.T  # (n_el, n_qp)
    B = np.einsum("qad,qbd->qab", grad, grad) * detJ  # unit weights for 2x2 Gauss
    return np.einsum("eq,qab->eab", a_q, B)


def element_advection(mesh, w):
    """Element matrices ``int (w . grad(phi_b)) phi_a`` (row ``a`` = test function)."""
    N, grad, detJ = _geometry(mesh)
    wgrad = grad @ np.asarray(w, dtype=float)  # (n_qp, 4)
    ke = np.einsum("qa,qb->ab", N, wgrad) * detJ
    return np.broadcast_to(ke, (mesh.n_elements, 4, 4))


def assemble_diffusion(mesh, coeff_field, eliminate=True):
    """Diffusion matrix for a nodal coefficient field, interior x interior.

    ``eliminate=False`` returns the full node x node matrix.
    """
    coeff_field = np.asarray(coeff_field, dtype=float)
    if coeff_field.shape != (mesh.n_nodes,):
        raise ValueError(f"coefficient field must have {mesh.n_nodes} nodal values")
    return _scatter(mesh, element_diffusion(mesh, coeff_field), eliminate)


def assemble_advection(mesh, w, eliminate=True):
    """Advection matrix for a constant velocity ``w``, interior x interior."""
    return _scatter(mesh, element_advection(mesh, w), eliminate)


def assemble_mass(mesh, eliminate=True):
    N, _, detJ = _geometry(mesh)
    ke = np.einsum("qa,qb->ab", N, N) * detJ
    return _scatter(mesh, np.broadcast_to(ke, (mesh.n_elements, 4, 4)), eliminate)


def assemble_load(mesh, f_value=1.0):
    """Consistent load vector of a constant source on interior nodes."""
    N, _, detJ = _geometry(mesh)
    fe = float(f_value) * N.sum(axis=0) * detJ
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.elements.ravel(), np.tile(fe, mesh.n_elements))
    return b[mesh.interior_nodes]


def assemble_Ki_family(mesh, field, w=(1.0, 1.0), f_value=1.0):
    """Stiffness coefficients ``[K_0, ..., K_P]`` and the deterministic load.

    Advection enters only ``K_0``.
    """
    coeffs = np.asarray(field.coeffs if hasattr(field, "coeffs") else field, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[1] != mesh.n_nodes:
        raise ValueError("field coefficients must have shape (P_hat + 1, n_nodes)")
    K = [assemble_diffusion(mesh, c) for c in coeffs]
    K[0] = (K[0] + assemble_advection(mesh, w)).tocsr()
    K[0].sort_indices()
    return K, assemble_load(mesh, f_value)


def interior_to_full(mesh, u_interior):
    """Embed interior values into a full nodal vector with zero boundary values."""
    u = np.zeros(u_interior.shape[:-1] + (mesh.n_nodes,))
    u[..., mesh.interior_nodes] = u_interior
    return u


def export_matrix_market(matrices, prefix):
    """Write each matrix as ``{prefix}K{i}.mtx``; returns the paths."""
    paths = []
    for i, K in enumerate(matrices):
        path = f"{prefix}K{i}.mtx"
        scipy.io.mmwrite(path, K)
        paths.append(path)
    return paths
