"""Experiment harness: one configuration, parameter sweeps, residual histories."""
from __future__ import annotations

import csv
import dataclasses
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .fem2d import export_matrix_market
from .krylov import MeanSolver, gmres, write_history_csv
from .preconditioners import make_preconditioner
from .problem import build_system
from .random_field import field_statistics
from .relaxation import RelaxConfig, gauss_seidel_solve, jacobi_solve

__all__ = [
    "METHODS",
    "RESULTS_HEADER",
    "ExperimentConfig",
    "MethodResult",
    "ResultRow",
    "run_single",
    "run_sweep",
    "residual_history",
    "write_results_csv",
    "parse_config_text",
    "load_config_file",
]

METHODS = ("MB", "AGS", "AJ", "GS_prec", "KP", "GS_solver", "Jacobi_solver")
RESULTS_HEADER = "# sgkit-results v1"
_PRECOND_OF = {"MB": "MB", "AGS": "AGS", "AJ": "AJ", "GS_prec": "GS", "KP": "KP"}
SWEEP_AXES = {"dim": "M", "order": "p", "sigma": "sigma"}
DENSE_REFERENCE_LIMIT = 2500


@dataclass
class ExperimentConfig:
    """One point of the experimental protocol."""

    model: str = "uniform"
    M: int = 4
    p: int = 4
    sigma: float = 0.1
    L: float = 1.0
    mesh: tuple = (32, 32)
    w: tuple = (1.0, 1.0)
    tol: float = 1e-12
    inner_tol: float = 3e-13
    methods: tuple = METHODS
    seed: int = 0
    max_iter: int = 1000
    max_outer: int = 2000
    restart: int = 100
    mean: float | None = None
    coeff_order: int | None = None

    def __post_init__(self):
        self.model = str(self.model).lower()
        self.mesh = tuple(int(v) for v in self.mesh)
        self.w = tuple(float(v) for v in self.w)
        self.methods = tuple(self.methods)
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.methods:
            raise ValueError("at least one method is required")
        for name in ("M", "sigma", "L", "tol", "max_iter", "max_outer", "restart"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.p < 0:
            raise ValueError("p must be non-negative")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class MethodResult:
    method: str
    iterations: int
    converged: bool
    diverged: bool
    wall_time: float
    scaled_time: float
    matvec_count: int
    inner_solve_count: int
    rel_diff: float
    residual_history: list = field(default_factory=list, repr=False)

    @property
    def status(self):
        if self.converged:
            return "converged"
        return "diverged" if self.diverged else "not_converged"


@dataclass
class ResultRow:
    config: ExperimentConfig
    n_basis: int
    n_x: int
    mean_solve_time: float
    field_min: float
    field_max: float
    results: dict
    solutions: dict = field(default_factory=dict, repr=False)

    def iterations(self):
        return {m: r.iterations for m, r in self.results.items()}


def _solve_one(method, system, mean, cfg):
    op = system.op
    ops = [op]
    is0 = mean.inner_solve_count
    if method in _PRECOND_OF:
        P = make_preconditioner(_PRECOND_OF[method], op, mean, system.coeff_basis)
        ops += [o for o in P.operators if o is not op]
        mv0 = [o.matvec_count for o in ops]
        u, report = gmres(op, system.rhs, P, tol=cfg.tol, max_iter=cfg.max_iter, restart=cfg.restart)
    else:
        mv0 = [o.matvec_count for o in ops]
        rcfg = RelaxConfig(tol=cfg.tol, inner_tol=cfg.inner_tol, max_outer=cfg.max_outer)
        solve = gauss_seidel_solve if method == "GS_solver" else jacobi_solve
        u, report = solve(op, system.rhs, rcfg, mean)
    report.method = method
    report.matvec_count = sum(o.matvec_count - m for o, m in zip(ops, mv0))
    report.inner_solve_count = mean.inner_solve_count - is0
    return u, report


def run_single(cfg, export_matrices=None, keep_solutions=False):
    """Build the system for ``cfg`` and run every requested method.

    The reference solution is a dense direct solve for small systems and
    GMRES with the mean-based preconditioner otherwise.  ``scaled_time`` is
    wall time divided by one deterministic solve at the mean field.
    """
    system = build_system(
        cfg.model,
        cfg.M,
        cfg.p,
        cfg.sigma,
        cfg.L,
        cfg.mesh,
        cfg.w,
        mean_value=cfg.mean,
        coeff_order=cfg.coeff_order,
    )
    if export_matrices:
        os.makedirs(export_matrices, exist_ok=True)
        export_matrix_market(system.matrices, os.path.join(export_matrices, ""))

    t0 = time.perf_counter()
    mean = MeanSolver(system.matrices[0])
    mean.solve(system.load)
    mean_time = time.perf_counter() - t0
    mean.inner_solve_count = 0

    op = system.op
    n = op.n_basis * op.n_x
    if n <= DENSE_REFERENCE_LIMIT:
        u_ref = np.linalg.solve(op.assemble_explicit(), system.rhs.ravel()).reshape(op.n_basis, op.n_x)
    else:
        u_ref = None

    solutions, reports = {}, {}
    for method in cfg.methods:
        solutions[method], reports[method] = _solve_one(method, system, mean, cfg)
    if u_ref is None:
        if "MB" in reports and reports["MB"].converged:
            u_ref = solutions["MB"]
        else:
            u_ref, _ = _solve_one("MB", system, mean, cfg)
    ref_norm = np.linalg.norm(u_ref)

    results = {}
    for method in cfg.methods:
        rep = reports[method]
        diff = np.linalg.norm(solutions[method] - u_ref) / ref_norm if ref_norm else 0.0
        results[method] = MethodResult(
            method=method,
            iterations=rep.iterations,
            converged=rep.converged,
            diverged=rep.diverged,
            wall_time=rep.wall_time,
            scaled_time=rep.wall_time / mean_time if mean_time > 0 else float("nan"),
            matvec_count=rep.matvec_count,
            inner_solve_count=rep.inner_solve_count,
            rel_diff=float(diff),
            residual_history=list(rep.residual_history),
        )
    stats = field_statistics(system.field, n_samples=200, seed=cfg.seed)
    return ResultRow(
        config=cfg,
        n_basis=op.n_basis,
        n_x=op.n_x,
        mean_solve_time=mean_time,
        field_min=stats["min"],
        field_max=stats["max"],
        results=results,
        solutions=solutions if keep_solutions else {},
    )


def _run_point(args):
    base, attr, value = args
    return run_single(base.replace(**{attr: value}))


def run_sweep(base, axis, values, out=None, n_procs=1):
    """One :func:`run_single` per value of ``axis`` (``dim``, ``order`` or ``sigma``).

    Rows come back in the order of ``values``; with ``n_procs > 1`` points
    run in separate processes.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    attr = SWEEP_AXES[axis]
    cast = float if attr == "sigma" else int
    jobs = [(base, attr, cast(v)) for v in values]
    if n_procs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_procs) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    if out is not None:
        write_results_csv(rows, out)
    return rows


def residual_history(cfg, out_dir=None):
    """Per-method relative residual histories; writes ``history_<method>.csv`` if asked."""
    row = run_single(cfg)
    hist = {m: r.residual_history for m, r in row.results.items()}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for m, r in row.results.items():
            write_history_csv(r, os.path.join(out_dir, f"history_{m}.csv"))
    return hist, row


_CONFIG_COLUMNS = ["model", "M", "p", "sigma", "L", "mesh_nx", "mesh_ny", "tol", "n_basis", "n_x"]
_METHOD_COLUMNS = [
    "iters",
    "status",
    "time",
    "scaled_time",
    "matvecs",
    "inner_solves",
    "rel_diff",
]


def results_table(rows):
    """Header and rows (lists of strings) for :func:`write_results_csv`."""
    methods = []
    for row in rows:
        for m in row.results:
            if m not in methods:
                methods.append(m)
    header = _CONFIG_COLUMNS + [f"{m}_{c}" for m in methods for c in _METHOD_COLUMNS]
    table = []
    for row in rows:
        c = row.config
        vals = [c.model, c.M, c.p, repr(c.sigma), repr(c.L), c.mesh[0], c.mesh[1], repr(c.tol)]
        vals += [row.n_basis, row.n_x]
        for m in methods:
            r = row.results.get(m)
            if r is None:
                vals += [""] * len(_METHOD_COLUMNS)
                continue
            vals += [
                r.iterations,
                r.status,
                f"{r.wall_time:.6g}",
                f"{r.scaled_time:.6g}",
                r.matvec_count,
                r.inner_solve_count,
                repr(r.rel_diff),
            ]
        table.append([str(v) for v in vals])
    return header, table


def write_results_csv(rows, path):
    header, table = results_table(rows)
    with open(path, "w", newline="") as fh:
        fh.write(RESULTS_HEADER + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(table)


# -- flat key=value configuration -------------------------------------------

CONFIG_KEYS = {
    "model": ("model", str),
    "dim": ("M", int),
    "order": ("p", int),
    "sigma": ("sigma", float),
    "L": ("L", float),
    "mesh": ("mesh", lambda s: _parse_pair(s, int)),
    "w": ("w", lambda s: _parse_pair(s, float)),
    "tol": ("tol", float),
    "inner_tol": ("inner_tol", float),
    "methods": ("methods", lambda s: tuple(m for m in s.replace(",", " ").split() if m)),
    "seed": ("seed", int),
    "max_iter": ("max_iter", int),
    "max_outer": ("max_outer", int),
    "restart": ("restart", int),
    "mean": ("mean", float),
    "coeff_order": ("coeff_order", int),
}


def _parse_pair(text, cast):
    text = str(text).lower().replace("x", ",")
    parts = [t for t in text.replace(" ", ",").split(",") if t]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ValueError(f"expected two values, got {text!r}")
    return tuple(cast(t) for t in parts)


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` comments allowed) into config overrides."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        attr, cast = CONFIG_KEYS[key]
        out[attr] = cast(value)
    return out


def load_config_file(path):
    with open(path) as fh:
        return parse_config_text(fh.read())
