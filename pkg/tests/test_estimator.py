import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sgkit import StochasticGalerkinSolver
from sgkit.pc_basis import eval_basis
from sgkit.random_field import evaluate_field


def test_params_roundtrip():
    est = StochasticGalerkinSolver(solver="jacobi", tol=1e-10, n_jobs=2)
    params = est.get_params()
    assert params["solver"] == "jacobi" and params["tol"] == 1e-10
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(preconditioner="KP")
    assert est.preconditioner == "KP"


@pytest.mark.parametrize(
    "kw",
    [
        {"solver": "gmres", "preconditioner": "AGS"},
        {"solver": "gmres", "preconditioner": None},
        {"solver": "gauss_seidel"},
        {"solver": "jacobi", "n_jobs": 2},
    ],
)
def test_fit_solves_system(kw, small_uniform):
    est = StochasticGalerkinSolver(**kw).fit(small_uniform)
    assert est.converged_ and est.n_iter_ >= 1
    assert est.residual(small_uniform) < 1e-11
    assert est.coef_.shape == small_uniform.rhs.shape


def test_predict_matches_sampled_deterministic_solve(small_uniform):
    # the Galerkin solution at a sample approximates the solve with the sampled coefficient
    from sgkit.fem2d import assemble_advection, assemble_diffusion
    import scipy.sparse.linalg as spla

    s = small_uniform
    est = StochasticGalerkinSolver().fit(s)
    xi = np.array([[0.3, -0.7]])
    a = evaluate_field(s.field, xi)[0]
    A = assemble_diffusion(s.mesh, a) + assemble_advection(s.mesh, (1.0, 1.0))
    u = spla.spsolve(A.tocsc(), s.load)
    pred = est.predict(xi)[0]
    # order-2 chaos truncation error is about 3e-4 here
    assert np.linalg.norm(pred - u) / np.linalg.norm(u) < 2e-3
    np.testing.assert_allclose(est.predict([0.3, -0.7]), est.predict(xi))
    np.testing.assert_allclose(pred, eval_basis(s.basis, xi)[0] @ est.coef_)


def test_mean_and_variance(small_lognormal):
    est = StochasticGalerkinSolver(preconditioner="GS").fit(small_lognormal)
    np.testing.assert_array_equal(est.solution_mean(), est.coef_[0])
    var = est.solution_variance()
    assert (var >= 0).all() and var.max() > 0
    samples = np.random.default_rng(3).standard_normal((4000, 2))
    mc = est.predict(samples)
    np.testing.assert_allclose(mc.mean(0), est.solution_mean(), rtol=0.02)


def test_tuple_input(small_uniform):
    s = small_uniform
    est = StochasticGalerkinSolver().fit((s.op, s.rhs))
    assert est.converged_
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0]])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        StochasticGalerkinSolver().predict([[0.0]])


@pytest.mark.parametrize(
    "kw", [{"solver": "cg"}, {"preconditioner": "ILU"}, {"tol": 0}, {"max_iter": -1}]
)
def test_bad_params(kw, tiny):
    with pytest.raises(ValueError):
        StochasticGalerkinSolver(**kw).fit(tiny)


def test_bad_inputs(tiny):
    with pytest.raises(TypeError):
        StochasticGalerkinSolver().fit("not a system")
    with pytest.raises(ValueError):
        StochasticGalerkinSolver().fit((tiny.op, np.ones(3)))
    bad = tiny.rhs.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        StochasticGalerkinSolver().fit((tiny.op, bad))
    est = StochasticGalerkinSolver().fit(tiny)
    with pytest.raises(ValueError):
        est.predict([[0.1, 0.2, 0.3]])
