"""Bernstein polynomial multiplication and fast L2 projection.

Vectors of coefficients may carry trailing axes (one column per element);
every apply below acts on axis 0 and broadcasts over the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .bernstein import (
    elevation_chain,
    elevation_matrix,
    eval_bernstein,
    index_lookup,
    mass_eigenvalues,
    multi_indices,
    num_basis,
)
from .quadrature import make_rule


class OpCounter:
    """Tally of multiply-adds per coefficient vector (per element)."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def reset(self) -> None:
        self.count = 0


def _count(counter, n):
    if counter is not None:
        counter.add(n)


def _multinom_ratio(gamma, beta) -> float:
    out = 1
    for g, b in zip(gamma, beta):
        out *= comb(g, b)
    return float(out)


# -- multiplication -------------------------------------------------------------


def multiply_linear(f: np.ndarray, g: np.ndarray, N: int, d: int, counter=None) -> np.ndarray:
    """Product of a degree-``N`` and a degree-1 polynomial (degree ``N + 1``)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[0] != num_basis(N, d) or g.shape[0] != d + 1:
        raise ValueError("coefficient lengths do not match degrees")
    E = elevation_matrix(N, d)
    out = np.zeros((num_basis(N + 1, d),) + np.broadcast_shapes(f.shape[1:], g.shape[1:]))
    look = index_lookup(N, d)
    hi = multi_indices(N + 1, d)
    for j in range(d + 1):
        rows, cols, vals = [], [], []
        for r, gam in enumerate(hi):
            if gam[j] > 0:
                a = list(gam)
                a[j] -= 1
                rows.append(r)
                cols.append(look[tuple(a)])
                vals.append(gam[j] / (N + 1))
        out[rows] += np.asarray(vals).reshape((-1,) + (1,) * (f.ndim - 1)) * f[cols] * g[j]
    _count(counter, 2 * E.nnz)
    return out


@dataclass(frozen=True)
class MultiplicationStencil:
    """Compressed-row stencil for degree ``N`` times degree ``M`` products.

    Row ``gamma`` lists pairs ``(gamma - beta, beta)`` with weight
    ``binom(gamma, beta) / binom(N + M, N)``.
    """

    N: int
    M: int
    d: int
    indptr: np.ndarray
    f_index: np.ndarray
    g_index: np.ndarray
    weights: np.ndarray
    _gather: sp.csr_matrix = field(repr=False, compare=False)

    @property
    def nnz(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def multiplication_stencil(N: int, M: int, d: int) -> MultiplicationStencil:
    lookN = index_lookup(N, d)
    lookM = index_lookup(M, d)
    denom = comb(N + M, N)
    indptr = [0]
    fi, gi, w = [], [], []
    for gam in multi_indices(N + M, d):
        for beta in multi_indices(M, d):
            a = tuple(g - b for g, b in zip(gam, beta))
            if min(a) < 0:
                continue
            fi.append(lookN[a])
            gi.append(lookM[beta])
            w.append(_multinom_ratio(gam, beta) / denom)
        indptr.append(len(w))
    indptr = np.asarray(indptr)
    w = np.asarray(w)
    nrow = len(indptr) - 1
    rows = np.repeat(np.arange(nrow), np.diff(indptr))
    gather = sp.csr_matrix((w, (rows, np.arange(len(w)))), shape=(nrow, len(w)))
    return MultiplicationStencil(N, M, d, indptr, np.asarray(fi), np.asarray(gi), w, gather)


def multiply_general(f: np.ndarray, g: np.ndarray, stencil: MultiplicationStencil,
                     counter=None) -> np.ndarray:
    """Bernstein coefficients of ``f * g`` at degree ``N + M``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[0] != num_basis(stencil.N, stencil.d) or g.shape[0] != num_basis(stencil.M, stencil.d):
        raise ValueError("stencil was built for different degrees")
    prods = f[stencil.f_index] * g[stencil.g_index]
    _count(counter, 2 * stencil.nnz)
    if prods.ndim == 1:
        return stencil._gather @ prods
    shape = prods.shape
    out = stencil._gather @ prods.reshape(shape[0], -1)
    return out.reshape((-1,) + shape[1:])


# -- projection -------------------------------------------------------------------


def projection_coeffs(N: int, M: int, d: int, eigenvalues=None) -> np.ndarray:
    """Scalars ``c_j`` of the elevation/reduction form of ``P^{N+M}_N``.

    Solves ``sum_j c_j lam^{N-j}_k / lam^N_k = lam^{N+M}_k / lam^N_k``,
    ``k = 0..N``, by back substitution (row ``k`` only involves
    ``j <= N - k``).  ``eigenvalues`` maps degree -> distinct mass
    eigenvalues; computed on demand when omitted.
    """
    lam = _eig_source(eigenvalues, d)
    lN = lam(N)
    target = lam(N + M)[: N + 1] / lN
    A = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        for j in range(N - k + 1):
            A[k, j] = lam(N - j)[k] / lN[k]
    return _anti_triangular_solve(A, target)


def mass_inverse_coeffs(N: int, d: int, eigenvalues=None) -> tuple[np.ndarray, float]:
    """Scalars ``c_j`` with ``M_N^{-1} = sum_j c_j E E^T`` and their condition number."""
    lam = _eig_source(eigenvalues, d)
    A = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        for j in range(N - k + 1):
            A[k, j] = lam(N - j)[k]
    c = _anti_triangular_solve(A, np.ones(N + 1))
    return c, float(np.abs(c).sum())


def condition_number(c) -> float:
    return float(np.abs(np.asarray(c)).sum())


def _eig_source(eigenvalues, d):
    if eigenvalues is None:
        return lambda n: mass_eigenvalues(n, d)
    return lambda n: np.asarray(eigenvalues[n])


def _anti_triangular_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    # row k is supported on columns 0..N-k; the last row fixes c_0
    n = len(b)
    c = np.zeros(n)
    for k in range(n - 1, -1, -1):
        jmax = n - 1 - k
        piv = A[k, jmax]
        if piv == 0 or not np.isfinite(piv):
            raise ZeroDivisionError(f"singular pivot in row {k}")
        c[jmax] = (b[k] - A[k, :jmax] @ c[:jmax]) / piv
    return c


def bernstein_mixed_mass(N: int, K: int, d: int) -> np.ndarray:
    """``int B^N_alpha B^K_beta`` over the reference simplex."""
    rule = make_rule(d, N + K)
    VN = eval_bernstein(N, d, rule.bary)
    VK = eval_bernstein(K, d, rule.bary)
    return VN.T @ (rule.weights[:, None] * VK)


def build_projection_direct(N: int, M: int, d: int) -> np.ndarray:
    """Dense ``P^{N+M}_N = M_N^{-1} M_{N, N+M}`` from quadrature."""
    MN = bernstein_mixed_mass(N, N, d)
    return np.linalg.solve(MN, bernstein_mixed_mass(N, N + M, d))


@dataclass(frozen=True)
class ProjectionDecomposition:
    N: int
    M: int
    d: int
    coeffs: np.ndarray
    # elevations[n] maps degree n -> n + 1, reductions[n] is its transpose
    elevations: tuple
    reductions: tuple

    def dense(self) -> np.ndarray:
        """Reconstruct ``sum_j c_j E^N_{N-j} (E^N_{N-j})^T (E^{N+M}_N)^T``."""
        N, M, d = self.N, self.M, self.d
        R = elevation_chain(N, N + M, d).T
        P = np.zeros((num_basis(N, d), num_basis(N + M, d)))
        for j, c in enumerate(self.coeffs):
            E = elevation_chain(N - j, N, d)
            P += c * (E @ (E.T @ R))
        return P


@lru_cache(maxsize=None)
def projection_decomposition(N: int, M: int, d: int) -> ProjectionDecomposition:
    elev = tuple(elevation_matrix(n, d) for n in range(N + M))
    red = tuple(E.T.tocsr() for E in elev)
    return ProjectionDecomposition(N, M, d, projection_coeffs(N, M, d), elev, red)


def apply_projection_telescoping(u: np.ndarray, decomp: ProjectionDecomposition,
                                 counter=None) -> np.ndarray:
    """Apply ``P^{N+M}_N`` with sparse one-degree sweeps.

    Reduce ``M`` times to degree ``N``, sweep down to degree 0 keeping
    ``c_j``-scaled copies, then elevate back up accumulating them.
    """
    N, M, d = decomp.N, decomp.M, decomp.d
    u = np.asarray(u, dtype=float)
    if u.shape[0] != num_basis(N + M, d):
        raise ValueError("input degree does not match decomposition")
    red = decomp.reductions
    elev = decomp.elevations
    shape = u.shape
    v = u.reshape(shape[0], -1)
    for n in range(N + M - 1, N - 1, -1):
        v = red[n] @ v
        _count(counter, red[n].nnz)
    c = decomp.coeffs
    saved = [c[0] * v]
    for j in range(1, N + 1):
        v = red[N - j] @ v
        _count(counter, red[N - j].nnz)
        saved.append(c[j] * v)
    _count(counter, sum(num_basis(N - j, d) for j in range(N + 1)))
    acc = saved[N]
    for j in range(N - 1, -1, -1):
        acc = saved[j] + elev[N - j - 1] @ acc
        _count(counter, elev[N - j - 1].nnz + num_basis(N - j, d))
    return acc.reshape((acc.shape[0],) + shape[1:])


def apply_mass_inverse_decomposed(b: np.ndarray, N: int, d: int, coeffs=None) -> np.ndarray:
    """``sum_j c_j E^N_{N-j} (E^N_{N-j})^T b`` via the same sweeps."""
    if coeffs is None:
        coeffs, _ = mass_inverse_coeffs(N, d)
    v = np.asarray(b, dtype=float)
    saved = [coeffs[0] * v]
    for j in range(1, N + 1):
        v = elevation_matrix(N - j, d).T @ v
        saved.append(coeffs[j] * v)
    acc = saved[N]
    for j in range(N - 1, -1, -1):
        acc = saved[j] + elevation_matrix(N - j - 1, d) @ acc
    return acc


def roundoff_study(Ns, d: int = 3) -> list[dict]:
    """Residuals of the decomposed vs direct mass inverse on ``b = M 1``."""
    from .bernstein import bernstein_mass

    rows = []
    for N in Ns:
        Mmat = bernstein_mass(N, d)
        e = np.ones(len(Mmat))
        b = Mmat @ e
        coeffs, cond = mass_inverse_coeffs(N, d)
        dec = np.max(np.abs(apply_mass_inverse_decomposed(b, N, d, coeffs) - e))
        direct = np.max(np.abs(np.linalg.solve(Mmat, b) - e))
        rows.append({"N": N, "residual_decomposed": float(dec),
                     "residual_direct": float(direct), "condition": cond})
    return rows
