"""Time integration and the assembled acoustic/elastic semi-discrete systems."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .bernstein import bernstein_mass, eval_bernstein, num_basis
from .kernels import acoustic_rhs, build_operators, elastic_rhs
from .mesh import Mesh
from .polyalg import OpCounter
from .quadrature import make_rule
from .wadg import ElasticWadg, MaterialProjector, WadgOperator, quadrature_operators

# Carpenter-Kennedy five-stage, fourth-order low-storage Runge-Kutta
RK4A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
RK4B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
RK4C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363183374.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])


class SolverDivergence(FloatingPointError):
    """Raised when the state stops being finite."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state detected at step {step}")
        self.step = step


def lsrk4_step(state: list, t: float, dt: float, rhs: Callable, res: list | None = None) -> list:
    """Advance ``state`` (list of arrays) in place by one step.

    ``res`` holds one residual buffer per field and is reused between
    steps when given.
    """
    if res is None:
        res = [np.zeros_like(s) for s in state]
    for a, b, c in zip(RK4A, RK4B, RK4C):
        k = rhs(state, t + c * dt)
        for i in range(len(state)):
            res[i] *= a
            res[i] += dt * k[i]
            state[i] += b * res[i]
    return state


def integrate(state: list, rhs: Callable, dt: float, nsteps: int, t0: float = 0.0,
              callback: Callable | None = None) -> list:
    """Run ``nsteps`` LSRK4 steps; ``callback(step, t, state)`` after each."""
    res = [np.zeros_like(s) for s in state]
    t = t0
    for n in range(1, nsteps + 1):
        lsrk4_step(state, t, dt, rhs, res)
        t = t0 + n * dt
        if not all(np.isfinite(s).all() for s in state):
            raise SolverDivergence(n)
        if callback is not None:
            callback(n, t, state)
    return state


def time_step(mesh: Mesh, N: int, c_max: float, T: float, cfl: float = 0.5) -> tuple[float, int]:
    """``dt <= cfl h_min / (c_max N^2)`` adjusted to land exactly on ``T``."""
    dt = cfl * mesh.h_min() / (c_max * N**2)
    nsteps = int(np.ceil(T / dt - 1e-12))
    return T / nsteps, nsteps


def sample_on_rule(mesh: Mesh, rule, func: Callable) -> np.ndarray:
    """Values ``(num_points, K)`` of ``func(x)`` with ``x`` of shape ``(..., d)``."""
    x = mesh.map_points(rule.points)
    return np.asarray(func(x), dtype=float).T


class AcousticSolver:
    """Velocity-pressure system with a weight-adjusted ``c^2`` update.

    ``M=None`` uses the exact ``c^2`` at quadrature points (full
    quadrature WADG).  Otherwise ``c^2`` is projected onto degree ``M`` once
    at setup and applied by the chosen ``mode``.
    """

    def __init__(self, mesh: Mesh, N: int, c2: Callable, M: int | None = 1, mode: str = "fast",
                 tau_p: float = 1.0, tau_u: float = 1.0, source: Callable | None = None):
        if N < 1:
            raise ValueError("N must be at least 1")
        if M is not None and not 0 <= M <= N:
            raise ValueError("M must satisfy 0 <= M <= N")
        if M is None and mode == "fast":
            raise ValueError("the fast path needs a polynomial degree M")
        self.mesh, self.N, self.M, self.mode = mesh, N, M, mode
        self.d = mesh.dim
        self.tau_p, self.tau_u = tau_p, tau_u
        self.ops = build_operators(mesh, N)
        rule = make_rule(self.d, 2 * N + 1)
        c2_vals = sample_on_rule(mesh, rule, c2)
        self.projector = None
        if M is None:
            self.weight = WadgOperator("oracle", N, self.d, weight_values=c2_vals, rule=rule)
            self.c2_coeffs = None
            c2_on_rule = c2_vals
        else:
            self.projector = MaterialProjector(M, self.d, rule)
            self.c2_coeffs = self.projector(c2_vals)
            self.weight = WadgOperator(mode, N, self.d, M, weight_coeffs=self.c2_coeffs)
            c2_on_rule = eval_bernstein(M, self.d, rule.bary) @ self.c2_coeffs
        self.c_max = float(np.sqrt(c2_on_rule.max()))
        self.setup_projections = self.projector.calls if self.projector else 0
        self.source_spatial = None
        if source is not None:
            # source(x) is the spatial factor, multiplied by sin(pi t)
            srule = make_rule(self.d, 2 * N + 2)
            q = quadrature_operators(N, self.d, srule)
            self.source_spatial = q.Pq @ sample_on_rule(mesh, srule, source)
        self.counter = OpCounter()

    @property
    def Np(self) -> int:
        return num_basis(self.N, self.d)

    def zero_state(self) -> list:
        return [np.zeros((self.Np, self.mesh.K)) for _ in range(self.d + 1)]

    def rhs(self, state: list, t: float) -> list:
        p, u = state[0], state[1:]
        dp, du = acoustic_rhs(p, u, self.ops, self.tau_p, self.tau_u)
        if self.source_spatial is not None:
            dp = dp + np.sin(np.pi * t) * self.source_spatial
        return [self.weight(dp)] + du

    def run(self, state: list, T: float, cfl: float = 0.5, callback=None) -> list:
        dt, nsteps = time_step(self.mesh, self.N, self.c_max, T, cfl)
        self.dt, self.nsteps = dt, nsteps
        integrate(state, self.rhs, dt, nsteps, callback=callback)
        if self.projector is not None and self.projector.calls != self.setup_projections:
            raise RuntimeError("material projection occurred inside the time loop")
        return state


class ElasticSolver:
    """Velocity-stress system in 3D with isotropic weights ``1/rho``, ``mu``, ``lam``."""

    def __init__(self, mesh: Mesh, N: int, rho: Callable, mu: Callable, lam: Callable,
                 M: int = 1, mode: str = "fast", tau_v: float = 1.0, tau_sigma: float = 1.0):
        if mesh.dim != 3:
            raise ValueError("elastic solver requires a 3D mesh")
        if not 0 <= M <= N:
            raise ValueError("M must satisfy 0 <= M <= N")
        self.mesh, self.N, self.M, self.mode = mesh, N, M, mode
        self.d = 3
        self.tau_v, self.tau_sigma = tau_v, tau_sigma
        self.ops = build_operators(mesh, N)
        rule = make_rule(3, 2 * N + 1)
        self.projector = MaterialProjector(M, 3, rule)
        rho_inv = self.projector(1.0 / sample_on_rule(mesh, rule, rho))
        mu_c = self.projector(sample_on_rule(mesh, rule, mu))
        lam_c = self.projector(sample_on_rule(mesh, rule, lam), check_positive=False)
        self.material = (rho_inv, mu_c, lam_c)
        self.weight = ElasticWadg(mode, N, 3, M, rho_inv, mu_c, lam_c)
        V = eval_bernstein(M, 3, rule.bary)
        # fastest (P-wave) speed bounds the step
        self.c_max = float(np.sqrt(((V @ lam_c + 2 * V @ mu_c) * (V @ rho_inv)).max()))
        self.setup_projections = self.projector.calls
        self.counter = OpCounter()

    @property
    def Np(self) -> int:
        return num_basis(self.N, 3)

    def zero_state(self) -> list:
        return [np.zeros((self.Np, self.mesh.K)) for _ in range(9)]

    def rhs(self, state: list, t: float) -> list:
        dv, ds = elastic_rhs(state[:3], state[3:], self.ops, self.tau_v, self.tau_sigma)
        v, s = self.weight.velocity(dv), self.weight.stress(ds)
        return v + s

    def run(self, state: list, T: float, cfl: float = 0.5, callback=None) -> list:
        dt, nsteps = time_step(self.mesh, self.N, self.c_max, T, cfl)
        self.dt, self.nsteps = dt, nsteps
        integrate(state, self.rhs, dt, nsteps, callback=callback)
        if self.projector.calls != self.setup_projections:
            raise RuntimeError("material projection occurred inside the time loop")
        return state


def _weight_mass(solver: AcousticSolver) -> np.ndarray:
    """Per-element weighted mass ``M_{c^2}`` (K, Np, Np) consistent with the update."""
    w = solver.weight
    if w.mode == "oracle":
        Vq, wq, vals = w.qops.Vq, w.qops.rule.weights, w.values
    else:
        rule = make_rule(solver.d, 2 * solver.N + solver.M)
        Vq, wq = eval_bernstein(solver.N, solver.d, rule.bary), rule.weights
        vals = eval_bernstein(solver.M, solver.d, rule.bary) @ w.coeffs
    return np.einsum("qi,qk,qj->kij", Vq, wq[:, None] * vals, Vq)


def acoustic_energy(solver: AcousticSolver, state: list) -> float:
    """``1/2 sum_k J_k (p^T M M_{c^2}^{-1} M p + sum_i u_i^T M u_i)``.

    The pressure part is the weight-adjusted approximation of ``int p^2 / c^2``,
    for which the semi-discrete system is energy stable.
    """
    M = bernstein_mass(solver.N, solver.d)
    Mp = M @ state[0]
    Mw = _weight_mass(solver)
    y = np.linalg.solve(Mw, Mp.T[:, :, None])[:, :, 0].T
    e = np.sum(Mp * y, axis=0)
    for u in state[1:]:
        e = e + np.sum(u * (M @ u), axis=0)
    return 0.5 * float(np.sum(solver.mesh.J * e))


def elastic_energy(solver: ElasticSolver, state: list) -> float:
    """Weight-adjusted energy ``1/2 sum_k (v, rho v) + (sigma, C^{-1} sigma)``."""
    N, M = solver.N, solver.M
    rule = make_rule(3, 2 * N + M)
    Vq = eval_bernstein(N, 3, rule.bary)
    Vm = eval_bernstein(M, 3, rule.bary)
    rho_inv, mu, lam = (Vm @ c for c in solver.material)
    Mref = bernstein_mass(N, 3)
    wmass = lambda w: np.einsum("qi,qk,qj->kij", Vq, rule.weights[:, None] * w, Vq)  # noqa: E731
    Np, K = Vq.shape[1], solver.mesh.K
    MC = np.zeros((K, 6 * Np, 6 * Np))
    for i in range(6):
        blk = slice(i * Np, (i + 1) * Np)
        MC[:, blk, blk] = wmass(mu if i >= 3 else 2 * mu)
        if i < 3:
            for j in range(3):
                MC[:, blk, slice(j * Np, (j + 1) * Np)] += wmass(lam)
    e = np.zeros(K)
    Mr = wmass(rho_inv)
    for v in state[:3]:
        Mv = Mref @ v
        e += np.einsum("ik,ki->k", Mv, np.linalg.solve(Mr, Mv.T[:, :, None])[:, :, 0])
    Ms = np.concatenate([Mref @ s for s in state[3:]], axis=0)
    e += np.einsum("ik,ki->k", Ms, np.linalg.solve(MC, Ms.T[:, :, None])[:, :, 0])
    return 0.5 * float(np.sum(solver.mesh.J * e))
