import logging

import numpy as np
import pytest
import scipy.sparse as sp

from sgkit.krylov import MeanSolver
from sgkit.pc_basis import build_basis, triple_products
from sgkit.preconditioners import mean_based_apply
from sgkit.relaxation import (
    RelaxConfig,
    gauss_seidel_solve,
    gauss_seidel_sweep,
    jacobi_solve,
    jacobi_sweep,
)
from sgkit.sg_operator import SGOperator

from conftest import tiny_system


def _splitting(op):
    """Dense block diagonal D = diag(c_0kk K_0) and the coupling N = A - D."""
    A = op.assemble_explicit()
    nx, nb = op.n_x, op.n_basis
    D = np.zeros_like(A)
    K0 = op.matrices[0].toarray()
    for k in range(nb):
        D[k * nx : (k + 1) * nx, k * nx : (k + 1) * nx] = op.mean_diagonal[k] * K0
    return A, D, A - D


def _strict_lower(N, nb, nx):
    L = N.copy()
    for r in range(nb):
        L[r * nx : (r + 1) * nx, r * nx :] = 0.0
    return L


@pytest.mark.parametrize("solve", [jacobi_solve, gauss_seidel_solve])
def test_deterministic_case_one_iteration(solve):
    s = tiny_system(1, 0, n=5)
    assert s.op.n_basis == 1
    u, rep = solve(s.op, s.rhs, RelaxConfig(tol=1e-12))
    assert rep.converged and rep.iterations == 1
    K0 = s.op.matrices[0]
    assert np.linalg.norm(K0 @ u[0] - s.rhs[0]) / np.linalg.norm(s.rhs) < 1e-13


@pytest.mark.parametrize("solve", [jacobi_solve, gauss_seidel_solve])
@pytest.mark.parametrize("fixture", ["tiny", "small_uniform", "small_lognormal"])
def test_matches_dense_solution(solve, fixture, request):
    s = request.getfixturevalue(fixture)
    tol = 1e-12
    u, rep = solve(s.op, s.rhs, RelaxConfig(tol=tol))
    assert rep.converged and not rep.diverged
    A = s.op.assemble_explicit()
    ref = np.linalg.solve(A, s.rhs.ravel())
    true_res = np.linalg.norm(s.rhs.ravel() - A @ u.ravel()) / np.linalg.norm(s.rhs)
    assert true_res <= 10 * tol
    assert np.linalg.norm(u.ravel() - ref) / np.linalg.norm(ref) < 1e-9
    assert len(rep.residual_history) == rep.iterations + 1


def test_gs_sweep_is_block_forward_substitution(small_lognormal, rng):
    op = small_lognormal.op
    nb, nx = op.n_basis, op.n_x
    mean = MeanSolver(op.matrices[0])
    A, D, N = _splitting(op)
    L = _strict_lower(N, nb, nx)
    f = rng.standard_normal((nb, nx))
    U = np.zeros_like(f)
    Z = f.copy()
    gauss_seidel_sweep(op, f, U, Z, mean)
    u1 = np.linalg.solve(D + L, f.ravel())
    np.testing.assert_allclose(U.ravel(), u1, atol=1e-12)
    gauss_seidel_sweep(op, f, U, Z, mean)
    u2 = np.linalg.solve(D + L, f.ravel() - (N - L) @ u1)
    np.testing.assert_allclose(U.ravel(), u2, atol=1e-12)


def test_gs_incremental_residual_is_exact(small_uniform, rng):
    op = small_uniform.op
    mean = MeanSolver(op.matrices[0])
    f = rng.standard_normal((op.n_basis, op.n_x))
    U, Z = np.zeros_like(f), f.copy()
    for _ in range(3):
        R = f.copy()
        gauss_seidel_sweep(op, f, U, Z, mean, R=R)
        np.testing.assert_allclose(R, f - op(U), atol=1e-13)


def test_gs_sweep_matvec_count(small_lognormal):
    op = small_lognormal.op
    mean = MeanSolver(op.matrices[0])
    f = small_lognormal.rhs
    U, Z = np.zeros_like(f), f.copy()
    c0, s0 = op.matvec_count, mean.inner_solve_count
    gauss_seidel_sweep(op, f, U, Z, mean, R=f.copy())
    assert op.matvec_count - c0 == op.n_fibers(include_mean=False) + op.n_basis
    assert mean.inner_solve_count - s0 == op.n_basis


def test_exact_solution_is_fixed_point(small_lognormal):
    op, f = small_lognormal.op, small_lognormal.rhs
    mean = MeanSolver(op.matrices[0])
    u = np.linalg.solve(op.assemble_explicit(), f.ravel()).reshape(f.shape)
    np.testing.assert_allclose(jacobi_sweep(op, f, u, mean), u, atol=1e-12)
    _, _, N = _splitting(op)
    upper = N - _strict_lower(N, op.n_basis, op.n_x)
    U = u.copy()
    Z = f - (upper @ u.ravel()).reshape(f.shape)
    gauss_seidel_sweep(op, f, U, Z, mean)
    np.testing.assert_allclose(U, u, atol=1e-12)


def test_first_jacobi_sweep_is_mean_based(small_uniform, rng):
    op = small_uniform.op
    mean = MeanSolver(op.matrices[0])
    f = rng.standard_normal((op.n_basis, op.n_x))
    U = jacobi_sweep(op, f, np.zeros_like(f), mean)
    # KL mode has c_0kk = 1, so the scaled solves reduce to plain K_0 solves
    np.testing.assert_allclose(op.mean_diagonal, 1.0, atol=1e-14)
    np.testing.assert_allclose(U, mean_based_apply(f, mean), atol=1e-14)


def test_parallel_jacobi_is_bitwise_identical(small_lognormal):
    op, f = small_lognormal.op, small_lognormal.rhs
    u1, r1 = jacobi_solve(op, f, RelaxConfig(n_jobs=1))
    u3, r3 = jacobi_solve(op, f, RelaxConfig(n_jobs=3))
    np.testing.assert_array_equal(u1, u3)
    assert r1.residual_history == r3.residual_history


def _strongly_coupled_operator(alpha):
    basis = build_basis(1, 3)
    tensor = triple_products(basis, mode="kl")
    K0 = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    return SGOperator([K0, alpha * K0], tensor)


def test_divergence_is_flagged():
    op = _strongly_coupled_operator(1.5)
    f = op.zeros()
    f[0] = 1.0
    u, rep = jacobi_solve(op, f, RelaxConfig(max_outer=500))
    assert rep.diverged and not rep.converged
    assert rep.iterations < 500
    assert rep.residual_history[-1] > 1e4 or not np.isfinite(rep.residual_history[-1])


def test_not_converged_within_budget():
    op = _strongly_coupled_operator(0.9)
    f = op.zeros()
    f[0] = 1.0
    _, rep = gauss_seidel_solve(op, f, RelaxConfig(max_outer=3))
    assert rep.iterations == 3 and not rep.converged and not rep.diverged


def test_drift_guard_resynchronizes(small_uniform, caplog):
    op, f = small_uniform.op, small_uniform.rhs
    cfg = RelaxConfig(check_every=1, drift_tol=-1.0)
    with caplog.at_level(logging.WARNING, logger="sgkit.relaxation"):
        u, rep = gauss_seidel_solve(op, f, cfg)
    assert rep.converged
    assert "drifted" in caplog.text
    u_ref, _ = gauss_seidel_solve(op, f)
    np.testing.assert_allclose(u, u_ref, atol=1e-12)


@pytest.mark.parametrize("solve", [jacobi_solve, gauss_seidel_solve])
def test_zero_rhs(solve, tiny):
    u, rep = solve(tiny.op, np.zeros_like(tiny.rhs))
    assert rep.converged and rep.iterations == 0 and not u.any()


def test_inner_solve_counters(small_uniform):
    op, f = small_uniform.op, small_uniform.rhs
    mean = MeanSolver(op.matrices[0])
    _, rep = jacobi_solve(op, f, mean=mean)
    assert rep.inner_solve_count == rep.iterations * op.n_basis
    assert mean.factorization_count == 1


def test_config_validation():
    with pytest.raises(ValueError):
        RelaxConfig(tol=0)
    with pytest.raises(ValueError):
        RelaxConfig(divergence_factor=1.0)
