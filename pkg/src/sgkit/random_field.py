"""Discretized random diffusion coefficients.

Two models are provided:

* a truncated Karhunen-Loeve (KL) expansion of a field with separable
  exponential covariance ``sigma^2 exp(-|x1 - x2|_1 / L)`` driven by
  independent unit-variance uniform variables;
* a lognormal field ``exp(g)`` whose Gaussian exponent ``g`` is a truncated
  KL expansion, projected onto a Hermite chaos basis in closed form.

1-D eigenpairs of the exponential kernel are analytic (roots of the usual
transcendental equations); 2-D pairs are tensor products of 1-D pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "CovarianceSpec",
    "KLExpansion",
    "FieldExpansion",
    "KLRootError",
    "kl_eigenpairs_1d",
    "nystrom_eigenvalues_1d",
    "kl_expand_2d",
    "uniform_kl_field",
    "lognormal_pce",
    "evaluate_field",
    "field_statistics",
    "sample_germ",
    "dump_field_csv",
]


class KLRootError(RuntimeError):
    """Raised when a transcendental root cannot be bracketed."""


@dataclass(frozen=True)
class CovarianceSpec:
    """Separable exponential covariance with standard deviation and correlation length."""

    sigma: float
    L: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.L > 0:
            raise ValueError(f"correlation length must be positive, got {self.L}")

    def __call__(self, x1, x2):
        d = np.abs(np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))
        if d.ndim and d.shape[-1] == 2:
            d = d.sum(axis=-1)
        return self.sigma**2 * np.exp(-d / self.L)


class _Eigenfunction:
    # cos/sin mode on [c - a, c + a], normalized in L2
    def __init__(self, kind, omega, center, half_width):
        self.kind = kind
        self.omega = omega
        self.center = center
        self.half_width = half_width
        a = half_width
        if kind == "even":
            norm2 = a + math.sin(2 * omega * a) / (2 * omega)
        else:
            norm2 = a - math.sin(2 * omega * a) / (2 * omega)
        self.scale = 1.0 / math.sqrt(norm2)

    def __call__(self, x):
        t = self.omega * (np.asarray(x, dtype=float) - self.center)
        return self.scale * (np.cos(t) if self.kind == "even" else np.sin(t))

    def __repr__(self):
        return f"_Eigenfunction({self.kind}, omega={self.omega:.6g})"


def _branch_root(func, lo, hi, kind, n):
    span = hi - lo
    eps = 1e-12 * span
    a, b = lo + eps, hi - eps
    fa, fb = func(a), func(b)
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        raise KLRootError(f"cannot bracket {kind} root on branch {n}: f({a})={fa}, f({b})={fb}")
    return brentq(func, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)


def kl_eigenpairs_1d(cov, interval, n_terms):
    """Analytic eigenpairs of the 1-D exponential covariance on ``interval``.

    Returns a list of ``(eigenvalue, eigenfunction)`` sorted by decreasing
    eigenvalue; the eigenfunctions are callables normalized in L2 on the
    interval.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    lo, hi = map(float, interval)
    if not hi > lo:
        raise ValueError(f"empty interval {interval}")
    a = 0.5 * (hi - lo)
    c = 0.5 * (hi + lo)
    L = cov.L
    pairs = []
    for n in range(n_terms):
        # even: 1/L - w tan(w a) = 0 with w a in (n pi, n pi + pi/2)
        w = _branch_root(
            lambda w: 1.0 / L - w * math.tan(w * a),
            n * math.pi / a,
            (n + 0.5) * math.pi / a,
            "even",
            n,
        )
        pairs.append((w, _Eigenfunction("even", w, c, a)))
        # odd: w + tan(w a)/L = 0 with w a in (n pi + pi/2, (n+1) pi)
        w = _branch_root(
            lambda w: w + math.tan(w * a) / L,
            (n + 0.5) * math.pi / a,
            (n + 1) * math.pi / a,
            "odd",
            n,
        )
        pairs.append((w, _Eigenfunction("odd", w, c, a)))
    pairs.sort(key=lambda t: t[0])
    s2 = cov.sigma**2
    return [(2 * s2 * L / (1 + (w * L) ** 2), fn) for w, fn in pairs[:n_terms]]


def nystrom_eigenvalues_1d(cov, interval, n_points=200):
    """Eigenvalues of the trapezoid-rule Nystrom discretization (descending)."""
    x = np.linspace(interval[0], interval[1], n_points)
    h = x[1] - x[0]
    w = np.full(n_points, h)
    w[[0, -1]] = h / 2
    K = cov.sigma**2 * np.exp(-np.abs(x[:, None] - x[None, :]) / cov.L)
    sw = np.sqrt(w)
    lam = np.linalg.eigvalsh(sw[:, None] * K * sw[None, :])
    return lam[::-1]


@dataclass(frozen=True)
class KLExpansion:
    """Truncated KL expansion sampled at mesh nodes.

    Attributes
    ----------
    mean : ndarray (n_nodes,)
    eigenvalues : ndarray (M,)
        Non-increasing, positive.
    modes : ndarray (M, n_nodes)
        L2-orthonormal eigenfunctions at the nodes.
    functions : list of callables ``f(x, y)``, one per mode.
    """

    mean: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    modes: np.ndarray = field(repr=False)
    functions: tuple = field(default=(), repr=False)
    cov: CovarianceSpec | None = None

    @property
    def M(self):
        return self.eigenvalues.size

    def scaled_modes(self):
        return np.sqrt(self.eigenvalues)[:, None] * self.modes


@dataclass(frozen=True)
class FieldExpansion:
    """Nodal coefficients ``a_i(x)`` of a field ``sum_i a_i(x) xi_i``.

    ``mode == "kl"``: ``xi_0 = 1`` and ``xi_i`` the unit-variance first-order
    polynomial of dimension ``i`` in ``family``; ``mode == "pce"``:
    ``xi_i = psi_i`` of ``basis``.
    """

    mode: str
    coeffs: np.ndarray = field(repr=False)
    basis: object = None
    family: str = "legendre"

    @property
    def P_hat(self):
        return self.coeffs.shape[0] - 1


class _Product2D:
    def __init__(self, fx, fy):
        self.fx, self.fy = fx, fy

    def __call__(self, x, y):
        return self.fx(x) * self.fy(y)


def kl_expand_2d(cov, mesh, M, mean_value=1.0):
    """Top-``M`` tensor-product KL pairs of the separable exponential kernel on ``mesh``.

    2-D eigenvalues are ``lam_m * lam_n / sigma^2`` so that sigma^2 appears
    once.  Candidates come from the first ``ceil(sqrt(M)) + 4`` 1-D pairs per
    axis.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    n1 = math.isqrt(M - 1) + 1 + 4
    (x_lo, x_hi), (y_lo, y_hi) = mesh.domain
    px = kl_eigenpairs_1d(cov, (x_lo, x_hi), n1)
    py = kl_eigenpairs_1d(cov, (y_lo, y_hi), n1)
    if M > n1 * n1:
        raise ValueError(f"M={M} exceeds the candidate pool of {n1 * n1} tensor pairs")
    s2 = cov.sigma**2
    cand = [(lx * ly / s2, a, b) for a, (lx, _) in enumerate(px) for b, (ly, _) in enumerate(py)]
    # stable sort: ties resolved by (a, b) order
    cand.sort(key=lambda t: -t[0])
    chosen = cand[:M]
    xs, ys = mesh.nodes[:, 0], mesh.nodes[:, 1]
    lam = np.array([c[0] for c in chosen])
    funcs = tuple(_Product2D(px[a][1], py[b][1]) for _, a, b in chosen)
    modes = np.array([f(xs, ys) for f in funcs])
    return KLExpansion(
        mean=np.full(mesh.n_nodes, float(mean_value)),
        eigenvalues=lam,
        modes=modes,
        functions=funcs,
        cov=cov,
    )


def uniform_kl_field(kl):
    """KL-mode field expansion: ``coeffs = [a_0, sqrt(lam_1) a_1, ...]``.

    The driving variables are ``xi_i = sqrt(3) x_i`` with ``x_i`` uniform on
    [-1, 1], i.e. the first-order orthonormal Legendre polynomials.
    """
    coeffs = np.vstack([kl.mean[None, :], kl.scaled_modes()])
    return FieldExpansion(mode="kl", coeffs=coeffs, family="legendre")


def lognormal_pce(gaussian_kl, out_basis):
    """Hermite chaos coefficients of ``exp(g)`` for a Gaussian KL field ``g``.

    ``a_alpha(x) = exp(g_0 + sum_i h_i^2 / 2) * prod_i h_i^alpha_i / sqrt(alpha_i!)``
    with ``h_i = sqrt(lam_i) g_i(x)``.
    """
    if out_basis.family != "hermite":
        raise ValueError("lognormal projection requires a Hermite basis")
    if out_basis.M != gaussian_kl.M:
        raise ValueError(f"basis has M={out_basis.M}, KL expansion has {gaussian_kl.M} terms")
    h = gaussian_kl.scaled_modes()  # (M, n_nodes)
    a0 = np.exp(gaussian_kl.mean + 0.5 * np.sum(h**2, axis=0))
    idx = out_basis.indices
    p = out_basis.p
    powers = h[:, :, None] ** np.arange(p + 1)[None, None, :]  # (M, n, p+1)
    inv_sqrt_fact = 1.0 / np.sqrt([math.factorial(n) for n in range(p + 1)])
    coeffs = np.tile(a0, (out_basis.size, 1))
    for d in range(out_basis.M):
        coeffs *= (powers[d][:, idx[:, d]] * inv_sqrt_fact[idx[:, d]]).T
    return FieldExpansion(mode="pce", coeffs=coeffs, basis=out_basis, family="hermite")


def _chaos_values(field_exp, x, M):
    from .pc_basis import eval_1d, eval_basis

    x = np.atleast_2d(np.asarray(x, dtype=float))
    if field_exp.mode == "kl":
        if x.shape[1] != M:
            raise ValueError(f"samples have dimension {x.shape[1]}, expected {M}")
        return np.hstack([np.ones((x.shape[0], 1)), eval_1d(field_exp.family, 1, x)[..., 1]])
    return eval_basis(field_exp.basis, x)


def evaluate_field(field_exp, x):
    """Field values at every node for each sample row of ``x``.

    Samples are in the native coordinates of the chaos family (uniform on
    [-1, 1] for Legendre, standard normal for Hermite).  Returns an array of
    shape (n_samples, n_nodes).
    """
    M = field_exp.P_hat if field_exp.mode == "kl" else field_exp.basis.M
    vals = _chaos_values(field_exp, x, M)
    return vals @ field_exp.coeffs


def sample_germ(field_exp, n_samples, rng):
    """Draw samples of the inputs in native coordinates."""
    M = field_exp.P_hat if field_exp.mode == "kl" else field_exp.basis.M
    family = field_exp.family if field_exp.mode == "kl" else field_exp.basis.family
    if family == "legendre":
        return rng.uniform(-1.0, 1.0, size=(n_samples, M))
    return rng.standard_normal((n_samples, M))


def field_statistics(field_exp, n_samples=1000, seed=0):
    """Empirical min/max of the truncated field over random germ draws and all nodes."""
    rng = np.random.default_rng(seed)
    vals = evaluate_field(field_exp, sample_germ(field_exp, n_samples, rng))
    return {"min": float(vals.min()), "max": float(vals.max()), "positive": bool(vals.min() > 0)}


def dump_field_csv(mesh, field_exp, path):
    """Write ``node_x, node_y, coeff_0, ..., coeff_P`` rows."""
    header = ["node_x", "node_y"] + [f"coeff_{i}" for i in range(field_exp.coeffs.shape[0])]
    data = np.column_stack([mesh.nodes, field_exp.coeffs.T])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
