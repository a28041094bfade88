"""End-to-end assembly of the advection-diffusion Galerkin system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem2d import assemble_Ki_family, build_mesh
from .pc_basis import build_basis, triple_products
from .random_field import CovarianceSpec, kl_expand_2d, lognormal_pce, uniform_kl_field
from .sg_operator import SGOperator

__all__ = ["SGSystem", "build_system", "MODELS"]

MODELS = ("uniform", "lognormal")


@dataclass
class SGSystem:
    """Everything needed to solve one Galerkin system.

    ``coeff_basis`` is the basis indexing the coefficient expansion (``None``
    in KL mode, where index ``i`` is the KL variable itself).
    """

    model: str
    mesh: object
    basis: object
    coeff_basis: object
    field: object
    kl: object
    matrices: list = field(repr=False)
    load: np.ndarray = field(repr=False)
    op: SGOperator = field(repr=False)
    rhs: np.ndarray = field(repr=False)


def build_system(
    model="uniform",
    M=4,
    p=4,
    sigma=0.1,
    L=1.0,
    mesh=(32, 32),
    w=(1.0, 1.0),
    mean_value=None,
    coeff_order=None,
    domain=((-0.5, 0.5), (-0.5, 0.5)),
    drop_tol=1e-12,
):
    """Assemble basis, random field, ``{K_i}``, tensor and operator.

    Parameters
    ----------
    model : {"uniform", "lognormal"}
        ``"uniform"``: KL field with mean ``mean_value`` (default 1) and
        unit-variance uniform variables, Legendre chaos.  ``"lognormal"``:
        ``exp(g)`` with Gaussian KL ``g`` of mean ``mean_value`` (default 0),
        Hermite chaos.
    coeff_order : int, optional
        Total order of the lognormal coefficient expansion; defaults to ``p``.
    """
    model = model.lower()
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if not hasattr(mesh, "nodes"):
        mesh = build_mesh(mesh[0], mesh[1], domain)
    cov = CovarianceSpec(sigma=sigma, L=L)
    if model == "uniform":
        basis = build_basis(M, p, "legendre")
        kl = kl_expand_2d(cov, mesh, M, 1.0 if mean_value is None else mean_value)
        fld = uniform_kl_field(kl)
        tensor = triple_products(basis, "kl", drop_tol=drop_tol)
        coeff_basis = None
    else:
        basis = build_basis(M, p, "hermite")
        kl = kl_expand_2d(cov, mesh, M, 0.0 if mean_value is None else mean_value)
        coeff_basis = basis if coeff_order in (None, p) else build_basis(M, coeff_order, "hermite")
        fld = lognormal_pce(kl, coeff_basis)
        tensor = triple_products(basis, "pce", coeff_basis=coeff_basis, drop_tol=drop_tol)
    matrices, load = assemble_Ki_family(mesh, fld, w)
    op = SGOperator(matrices, tensor)
    return SGSystem(
        model=model,
        mesh=mesh,
        basis=basis,
        coeff_basis=coeff_basis,
        field=fld,
        kl=kl,
        matrices=matrices,
        load=load,
        op=op,
        rhs=op.rhs_from_load(load),
    )
