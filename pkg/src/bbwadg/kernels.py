"""Bernstein DG right-hand sides for the acoustic and elastic systems.

Fields are stored as ``(Np, K)`` arrays of Bernstein coefficients.  The
returned time derivatives omit the weighted mass matrix factor, which is
applied afterwards by :mod:`bbwadg.wadg`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .bernstein import (
    SparsityError,
    bernstein_mass,
    derivative_matrices,
    elevation_chain,
    elevation_matrix,
    eval_bernstein,
    index_lookup,
    multi_indices,
    num_basis,
)
from .mesh import FaceTraceMap, Mesh, face_trace_map
from .quadrature import make_rule

# rows of A_1, A_2, A_3 (stress ordering xx, yy, zz, yz, xz, xy)
A_MATRICES = np.zeros((3, 6, 3))
A_MATRICES[0, 0, 0] = A_MATRICES[0, 4, 2] = A_MATRICES[0, 5, 1] = 1.0
A_MATRICES[1, 1, 1] = A_MATRICES[1, 3, 2] = A_MATRICES[1, 5, 0] = 1.0
A_MATRICES[2, 2, 2] = A_MATRICES[2, 3, 1] = A_MATRICES[2, 4, 0] = 1.0


# -- lift ------------------------------------------------------------------------------


def dense_lift(N: int, d: int, f: int) -> np.ndarray:
    """Reference ``M^{-1} M_f`` (Np x Npf) built by quadrature."""
    rule = make_rule(d - 1, 2 * N)
    fb = rule.bary
    vb = np.insert(fb, f, 0.0, axis=1)
    Mf = eval_bernstein(N, d, vb).T @ (rule.weights[:, None] * eval_bernstein(N, d - 1, fb))
    return np.linalg.solve(bernstein_mass(N, d), Mf)


@dataclass(frozen=True)
class LiftFactorization:
    """``L^f = E^f_L L_0`` with ``E^f_L`` a chain of face reductions.

    Layer ``j`` (volume coefficients with ``alpha_f = j``) receives
    ``ell[j] * (E^N_{N-j})^T L_0 F`` on the face.
    """

    N: int
    d: int
    L0: sp.csr_matrix
    ell: np.ndarray
    face_reductions: tuple  # face_reductions[j]: face degree N-j -> N-j-1
    layers: tuple  # layers[f][j]: volume positions in face order

    def apply(self, F: np.ndarray, f: int, counter=None) -> np.ndarray:
        out = np.zeros((num_basis(self.N, self.d),) + F.shape[1:])
        w = self.L0 @ F
        if counter is not None:
            counter.add(self.L0.nnz)
        out[self.layers[f][0]] = self.ell[0] * w
        for j in range(1, self.N + 1):
            w = self.face_reductions[j - 1] @ w
            if counter is not None:
                counter.add(self.face_reductions[j - 1].nnz + len(self.layers[f][j]))
            out[self.layers[f][j]] = self.ell[j] * w
        return out

    def dense(self, f: int) -> np.ndarray:
        Npf = num_basis(self.N, self.d - 1)
        return self.apply(np.eye(Npf), f)


def _layers(N: int, d: int, f: int) -> list[np.ndarray]:
    vol = index_lookup(N, d)
    out = []
    for j in range(N + 1):
        pos = []
        for a in multi_indices(N - j, d - 1):
            full = list(a[:f]) + [j] + list(a[f:])
            pos.append(vol[tuple(full)])
        out.append(np.array(pos, dtype=int))
    return out


def face_chain_matrix(N: int, d: int, f: int = 0) -> np.ndarray:
    """Dense ``E^f_L`` (Np x Npf)."""
    layers = _layers(N, d, f)
    Npf = num_basis(N, d - 1)
    E = np.zeros((num_basis(N, d), Npf))
    for j in range(N + 1):
        ell = (-1) ** j * comb(N, j) / (1 + j)
        E[layers[j]] = ell * elevation_chain(N - j, N, d - 1).T
    return E


@lru_cache(maxsize=None)
def build_lift(N: int, d: int) -> LiftFactorization:
    """Factor the reference lift; ``L_0`` is obtained from the dense lift.

    ``L_0 = pinv(E^f_L) L^f`` thresholded at 1e-10 relative.  In 3D more
    than seven nonzeros per row raises :class:`SparsityError`.
    """
    EL = face_chain_matrix(N, d, 0)
    Ld = dense_lift(N, d, 0)
    L0 = np.linalg.lstsq(EL, Ld, rcond=None)[0]
    L0[np.abs(L0) < 1e-10 * np.abs(L0).max()] = 0.0
    L0s = sp.csr_matrix(L0)
    nnz_row = np.diff(L0s.indptr).max()
    if d == 3 and nnz_row > 7:
        raise SparsityError(f"L0 has {nnz_row} nonzeros in a row")
    ell = np.array([(-1) ** j * comb(N, j) / (1 + j) for j in range(N + 1)])
    reds = tuple(elevation_matrix(N - j - 1, d - 1).T.tocsr() for j in range(N))
    layers = tuple(tuple(_layers(N, d, f)) for f in range(d + 1))
    return LiftFactorization(N, d, L0s, ell, reds, layers)


# -- operator bundle -------------------------------------------------------------------------


@dataclass
class DGOperators:
    N: int
    d: int
    mesh: Mesh
    Dref: tuple
    lift: LiftFactorization
    traces: FaceTraceMap

    @property
    def Np(self) -> int:
        return num_basis(self.N, self.d)


def build_operators(mesh: Mesh, N: int) -> DGOperators:
    _, Dref = derivative_matrices(N, mesh.dim)
    return DGOperators(N, mesh.dim, mesh, tuple(Dref), build_lift(N, mesh.dim),
                       face_trace_map(mesh, N))


def _traces(u: np.ndarray, ops: DGOperators, f: int):
    flat = u.ravel()
    return flat[ops.traces.my_flat[f]], flat[ops.traces.nbr_flat[f]]


def _grad(u, ops: DGOperators):
    """Physical gradient components of a field, list over x_i."""
    G = ops.mesh.G
    Du = [D @ u for D in ops.Dref]
    return [sum(G[None, :, i, j] * Du[j] for j in range(ops.d)) for i in range(ops.d)]


def acoustic_rhs(p, u, ops: DGOperators, tau_p: float = 1.0, tau_u: float = 1.0):
    """Time derivatives ``(dp_pre, du)`` for the velocity-pressure system.

    Boundary faces use ``p+ = -p``, ``u+ = u``.
    """
    mesh = ops.mesh
    d = ops.d
    G = mesh.G
    dp = np.zeros_like(p)
    for j, D in enumerate(ops.Dref):
        dp -= D @ sum(G[None, :, i, j] * u[i] for i in range(d))
    gp = _grad(p, ops)
    du = [-g for g in gp]
    bnd = mesh.boundary
    for f in range(d + 1):
        pM, pP = _traces(p, ops, f)
        pP = np.where(bnd[None, :, f], -pM, pP)
        n = mesh.normals[:, f, :]
        jump_un = 0.0
        for i in range(d):
            uM, uP = _traces(u[i], ops, f)
            uP = np.where(bnd[None, :, f], uM, uP)
            jump_un = jump_un + n[None, :, i] * (uP - uM)
        jump_p = pP - pM
        Fp = 0.5 * (tau_p * jump_p - jump_un)
        Fu = 0.5 * (tau_u * jump_un - jump_p)
        scale = (mesh.Jf[:, f] / mesh.J)[None, :]
        dp += scale * ops.lift.apply(Fp, f)
        lu = scale * ops.lift.apply(Fu, f)
        for i in range(d):
            du[i] += n[None, :, i] * lu
    return dp, du


def elastic_rhs(v, sigma, ops: DGOperators, tau_v: float = 1.0, tau_sigma: float = 1.0):
    """Pre-mass-inverse time derivatives ``(dv, dsigma)`` in 3D.

    Traction-free boundaries via ``sigma+ = -sigma``, ``v+ = v``.
    """
    if ops.d != 3:
        raise ValueError("elastic system is implemented in 3D only")
    mesh = ops.mesh
    A = A_MATRICES
    gs = [_grad(s, ops) for s in sigma]  # gs[c][i]
    gv = [_grad(w, ops) for w in v]
    dv = [sum(A[i, c, a] * gs[c][i] for i in range(3) for c in range(6) if A[i, c, a])
          for a in range(3)]
    ds = [sum(A[i, c, a] * gv[a][i] for i in range(3) for a in range(3) if A[i, c, a])
          for c in range(6)]
    bnd = mesh.boundary
    for f in range(4):
        b = bnd[None, :, f]
        jv = []
        for a in range(3):
            m, pl = _traces(v[a], ops, f)
            jv.append(np.where(b, 0.0, pl - m))
        js = []
        for c in range(6):
            m, pl = _traces(sigma[c], ops, f)
            js.append(np.where(b, -2.0 * m, pl - m))
        An = np.einsum("ki,icA->kcA", mesh.normals[:, f, :], A)  # (K, 6, 3)
        AnT_js = [sum(An[None, :, c, a] * js[c] for c in range(6)) for a in range(3)]
        An_jv = [sum(An[None, :, c, a] * jv[a] for a in range(3)) for c in range(6)]
        Fv = [0.5 * AnT_js[a]
              + 0.5 * tau_v * sum(An[None, :, c, a] * An_jv[c] for c in range(6))
              for a in range(3)]
        Fs = [0.5 * An_jv[c]
              + 0.5 * tau_sigma * sum(An[None, :, c, a] * AnT_js[a] for a in range(3))
              for c in range(6)]
        scale = (mesh.Jf[:, f] / mesh.J)[None, :]
        for a in range(3):
            dv[a] = dv[a] + scale * ops.lift.apply(Fv[a], f)
        for c in range(6):
            ds[c] = ds[c] + scale * ops.lift.apply(Fs[c], f)
    return dv, ds
