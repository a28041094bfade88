import numpy as np
import pytest
import scipy.sparse as sp

from sgkit.krylov import MeanSolver, gmres
from sgkit.pc_basis import build_basis, triple_products
from sgkit.preconditioners import (
    PRECONDITIONERS,
    SingularGError,
    kronecker_precond_build,
    make_preconditioner,
    trace_weights,
)
from sgkit.sg_operator import SGOperator

from test_relaxation import _splitting, _strict_lower


def _dense_apply(P, op):
    n = op.shape[0]
    return np.column_stack([np.ravel(P(e.reshape(op.n_basis, op.n_x))) for e in np.eye(n)])


@pytest.fixture(params=["small_uniform", "small_lognormal"])
def system(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def mean(system):
    return MeanSolver(system.op.matrices[0])


def test_mean_based_oracle(system, mean):
    op = system.op
    K0 = op.matrices[0].toarray()
    ref = np.linalg.inv(np.kron(np.eye(op.n_basis), K0))
    np.testing.assert_allclose(_dense_apply(make_preconditioner("MB", op, mean), op), ref, atol=1e-11)


def test_gs_oracle(system, mean):
    op = system.op
    _, D, N = _splitting(op)
    ref = np.linalg.inv(D + _strict_lower(N, op.n_basis, op.n_x))
    np.testing.assert_allclose(_dense_apply(make_preconditioner("GS", op, mean), op), ref, atol=1e-11)


def test_two_outer_gs_sweeps(system, mean, rng):
    op = system.op
    _, D, N = _splitting(op)
    L = _strict_lower(N, op.n_basis, op.n_x)
    r = rng.standard_normal(op.shape[0])
    u1 = np.linalg.solve(D + L, r)
    u2 = np.linalg.solve(D + L, r - (N - L) @ u1)
    P = make_preconditioner("GS", op, mean, n_outer=2)
    np.testing.assert_allclose(P(r), u2, atol=1e-11)


def test_ags_oracle(system, mean):
    op = system.op
    op1 = op.first_order(system.coeff_basis)
    _, D, N = _splitting(op1)
    ref = np.linalg.inv(D + _strict_lower(N, op.n_basis, op.n_x))
    P = make_preconditioner("AGS", op, mean, system.coeff_basis)
    np.testing.assert_allclose(_dense_apply(P, op), ref, atol=1e-11)


def test_aj_oracle(system, mean):
    op = system.op
    op1 = op.first_order(system.coeff_basis)
    _, D, N = _splitting(op1)
    Dinv = np.linalg.inv(D)
    ref = Dinv - Dinv @ N @ Dinv  # two Jacobi sweeps from zero
    P = make_preconditioner("AJ", op, mean, system.coeff_basis)
    np.testing.assert_allclose(_dense_apply(P, op), ref, atol=1e-11)


def test_kp_oracle(system, mean):
    op = system.op
    P = make_preconditioner("KP", op, mean)
    ref = np.linalg.inv(np.kron(P.G.G, op.matrices[0].toarray()))
    np.testing.assert_allclose(_dense_apply(P, op), ref, atol=1e-11)
    assert P.G.weights[0] == pytest.approx(1.0)


def test_trace_weights_dense(small_lognormal):
    K = small_lognormal.op.matrices
    K0 = K[0].toarray()
    ref = [np.trace(Ki.toarray().T @ K0) / np.trace(K0.T @ K0) for Ki in K]
    np.testing.assert_allclose(trace_weights(K), ref, rtol=1e-13, atol=1e-16)


@pytest.mark.parametrize("kind", PRECONDITIONERS)
def test_linear_and_repeatable(kind, system, mean, rng):
    op = system.op
    P = make_preconditioner(kind, op, mean, system.coeff_basis)
    a, b = rng.standard_normal((2, op.n_basis, op.n_x))
    np.testing.assert_allclose(P(2 * a - 0.5 * b), 2 * P(a) - 0.5 * P(b), atol=1e-12)
    np.testing.assert_array_equal(P(a), P(a))
    assert P(a.ravel()).shape == a.ravel().shape


@pytest.mark.parametrize("kind", PRECONDITIONERS)
def test_preconditioned_operator_is_nonsingular(kind, system, mean):
    op = system.op
    M = _dense_apply(make_preconditioner(kind, op, mean, system.coeff_basis), op)
    assert np.linalg.matrix_rank(op.assemble_explicit() @ M) == op.shape[0]


@pytest.mark.parametrize("kind", PRECONDITIONERS)
def test_gmres_converges_with_each(kind, system, mean):
    op = system.op
    P = make_preconditioner(kind, op, mean, system.coeff_basis)
    x, rep = gmres(op, system.rhs, P, tol=1e-12)
    assert rep.converged
    assert np.linalg.norm(system.rhs - op(x)) / np.linalg.norm(system.rhs) < 1e-11


def test_ags_equals_gs_for_kl_fields(small_uniform, rng):
    op = small_uniform.op
    mean = MeanSolver(op.matrices[0])
    r = rng.standard_normal((op.n_basis, op.n_x))
    np.testing.assert_array_equal(
        make_preconditioner("AGS", op, mean)(r), make_preconditioner("GS", op, mean)(r)
    )


def test_ags_differs_from_gs_for_pce_fields(small_lognormal, rng):
    op = small_lognormal.op
    mean = MeanSolver(op.matrices[0])
    r = rng.standard_normal((op.n_basis, op.n_x))
    ags = make_preconditioner("AGS", op, mean, small_lognormal.coeff_basis)(r)
    gs = make_preconditioner("GS", op, mean)(r)
    assert np.abs(ags - gs).max() > 1e-8


def test_singular_G_detected():
    # order-1 basis in one variable: G_0 = I, G_1 = [[0, 1], [1, 0]]; K_1 = K_0 gives G = [[1, 1], [1, 1]]
    t = triple_products(build_basis(1, 1), mode="kl")
    K0 = sp.identity(3, format="csr")
    with pytest.raises(SingularGError):
        kronecker_precond_build(SGOperator([K0, K0], t))
    np.testing.assert_allclose(kronecker_precond_build(SGOperator([K0, 0.5 * K0], t)).G, [[1, 0.5], [0.5, 1]])


def test_unknown_kind(small_uniform):
    mean = MeanSolver(small_uniform.op.matrices[0])
    with pytest.raises(ValueError):
        make_preconditioner("ILU", small_uniform.op, mean)
    with pytest.raises(ValueError):
        make_preconditioner("GS", small_uniform.op, mean, n_outer=0)(small_uniform.rhs)
