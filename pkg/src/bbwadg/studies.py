"""Manufactured-solution studies, error norms and the kernel benchmark."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .bernstein import eval_bernstein, num_basis
from .mesh import Mesh, uniform_mesh
from .polyalg import OpCounter, multiplication_stencil, projection_decomposition
from .quadrature import make_rule
from .solver import AcousticSolver, sample_on_rule
from .wadg import WadgOperator, quadrature_wadg_apply, quadrature_operators


# -- wavespeeds and the manufactured solution ---------------------------------------------


def sine_wavespeed(k: float = 1.0) -> Callable:
    """``c^2 = 1 + sin(k pi x) sin(k pi y) [sin(k pi z)] / 2``."""
    def c2(x):
        return 1.0 + 0.5 * np.prod(np.sin(k * np.pi * x), axis=-1)
    return c2


def constant_wavespeed(c: float = 1.0) -> Callable:
    """``c^2`` equal to ``c**2`` everywhere (``c`` is the speed)."""
    if c <= 0:
        raise ValueError("wavespeed must be positive")
    def c2(x):
        return np.full(x.shape[:-1], float(c) ** 2)
    return c2


def parse_wavespeed(text: str) -> Callable:
    kind, _, arg = text.partition(":")
    if kind == "sine":
        return sine_wavespeed(float(arg or 1.0))
    if kind == "const":
        return constant_wavespeed(float(arg or 1.0))
    raise ValueError(f"unknown wavespeed model {text!r} (use sine:k or const:v)")


def exact_pressure(x, t):
    return np.prod(np.sin(np.pi * x), axis=-1) * np.cos(np.pi * t)


def exact_velocity(x, t, i):
    d = x.shape[-1]
    s = np.sin(np.pi * x)
    out = -np.cos(np.pi * x[..., i]) * np.sin(np.pi * t)
    for j in range(d):
        if j != i:
            out = out * s[..., j]
    return out


def manufactured_source(x, t, c2: Callable):
    """Pressure-equation source ``(d - 1/c^2) pi prod sin(pi x_i) sin(pi t)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return (d - 1.0 / c2(x)) * np.pi * np.prod(np.sin(np.pi * x), axis=-1) * np.sin(np.pi * t)


def initial_state(solver: AcousticSolver) -> list:
    """L2 projection of the manufactured solution at ``t = 0``."""
    N, d = solver.N, solver.d
    rule = make_rule(d, 2 * N + 2)
    q = quadrature_operators(N, d, rule)
    state = solver.zero_state()
    state[0] = q.Pq @ sample_on_rule(solver.mesh, rule, lambda x: exact_pressure(x, 0.0))
    return state


# -- error norms ------------------------------------------------------------------------------


def l2_error(coeffs: np.ndarray, exact: Callable, mesh: Mesh, N: int, rule=None) -> float:
    """``sqrt(sum_k J_k sum_q w_q (u_h - u)^2)`` with a rule of degree ``>= 2N + 2``."""
    rule = rule or make_rule(mesh.dim, 2 * N + 2)
    V = eval_bernstein(N, mesh.dim, rule.bary)
    diff = V @ coeffs - sample_on_rule(mesh, rule, exact)
    per_elem = rule.weights @ diff**2
    # weights integrate over the reference simplex; J maps its measure to the physical one
    return float(np.sqrt(np.sum(mesh.J * per_elem)))


def fit_rate(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def pairwise_rates(h, err) -> list[float]:
    return [float(np.log(err[i] / err[i + 1]) / np.log(h[i] / h[i + 1]))
            for i in range(len(h) - 1)]


# -- studies --------------------------------------------------------------------------------


def solve_manufactured(mesh: Mesh, N: int, M: int | None, mode: str = "fast", c2=None,
                       T: float = 1.0, cfl: float = 0.5, tau_p: float = 1.0,
                       tau_u: float = 1.0) -> dict:
    """Run the manufactured acoustic problem and return errors at ``T``."""
    c2 = c2 or sine_wavespeed(1.0)
    src = lambda x: manufactured_source(x, 0.5, c2)  # noqa: E731  (sin(pi/2) = 1)
    solver = AcousticSolver(mesh, N, c2, M, mode, tau_p, tau_u, source=src)
    state = initial_state(solver)
    solver.run(state, T, cfl)
    err = l2_error(state[0], lambda x: exact_pressure(x, T), mesh, N)
    return {"error": err, "dt": solver.dt, "steps": solver.nsteps, "state": state}


def convergence_study(d: int, N: int, M: int | None, levels=(4, 8, 16, 32), mode: str = "fast",
                      T: float = 1.0, cfl: float = 0.5, c2=None) -> list[dict]:
    """Errors of ``p`` over uniform meshes with ``levels`` cells per direction."""
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least three mesh levels")
    rows = []
    for n in levels:
        mesh = uniform_mesh(d, n)
        out = solve_manufactured(mesh, N, M, mode, c2, T, cfl)
        rows.append({"h": 2.0 / n, "error": out["error"], "steps": out["steps"]})
    rates = pairwise_rates([r["h"] for r in rows], [r["error"] for r in rows])
    for r, rate in zip(rows, [float("nan")] + rates):
        r["rate"] = rate
    return rows


def frequency_study(d: int, N: int, n: int, ks=(1, 4, 8, 12), Ms=None, T: float = 1.0,
                    cfl: float = 0.5, mode: str = "fast") -> list[dict]:
    """Error against ``M`` for ``c^2`` oscillating with frequency ``k``."""
    Ms = list(range(N + 1)) if Ms is None else list(Ms)
    mesh = uniform_mesh(d, n)
    rows = []
    for k in ks:
        for M in Ms:
            out = solve_manufactured(mesh, N, M, mode, sine_wavespeed(k), T, cfl)
            rows.append({"k": k, "M": M, "h": 2.0 / n, "error": out["error"]})
    return rows


def monotone_in_k(rows) -> dict:
    """Per ``M >= 1``: whether the error is non-decreasing in ``k``."""
    out = {}
    for M in sorted({r["M"] for r in rows}):
        if M < 1:
            continue
        errs = [r["error"] for r in sorted((r for r in rows if r["M"] == M), key=lambda r: r["k"])]
        out[M] = all(a <= b for a, b in zip(errs, errs[1:]))
    return out


def count_update_ops(N: int, M: int, d: int = 3) -> dict:
    """Multiply-adds per element for one weighted update (fast and oracle)."""
    rng = np.random.default_rng(0)
    u = rng.standard_normal(num_basis(N, d))
    w = 1.0 + rng.random(num_basis(M, d))
    fast, oracle = OpCounter(), OpCounter()
    WadgOperator("fast", N, d, M, weight_coeffs=w)(u, fast)
    q = quadrature_operators(N, d, make_rule(d, 2 * N + 1))
    quadrature_wadg_apply(u, np.ones(q.rule.num_points), q, oracle)
    return {"fast": fast.count, "oracle": oracle.count}


def kernel_benchmark(Ns, M: int = 1, d: int = 3, K: int = 1000, warmup: int = 10,
                     reps: int = 100, seed: int = 0) -> list[dict]:
    """Per-element wall time and counted operations of both update paths."""
    rng = np.random.default_rng(seed)
    rows = []
    for N in Ns:
        Np = num_basis(N, d)
        u = rng.standard_normal((Np, K))
        w = 1.0 + rng.random((num_basis(M, d), K))
        multiplication_stencil(N, M, d), projection_decomposition(N, M, d)
        fast = WadgOperator("fast", N, d, M, weight_coeffs=w)
        q = quadrature_operators(N, d, make_rule(d, 2 * N + 1))
        wq = 1.0 + rng.random((q.rule.num_points, K))
        times = {}
        for name, fn in (("fast", lambda: fast(u)),
                         ("oracle", lambda: quadrature_wadg_apply(u, wq, q))):
            for _ in range(warmup):
                fn()
            t0 = time.perf_counter()
            for _ in range(reps):
                fn()
            times[name] = (time.perf_counter() - t0) / (reps * K)
        ops = count_update_ops(N, M, d)
        rows.append({"N": N, "fast_time": times["fast"], "oracle_time": times["oracle"],
                     "fast_ops": ops["fast"], "oracle_ops": ops["oracle"]})
    return rows

