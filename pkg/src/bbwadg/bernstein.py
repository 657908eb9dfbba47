"""Bernstein-Bezier polynomials on the reference simplex.

Coefficient vectors of degree ``N`` are indexed by barycentric multi-indices
``alpha = (alpha_0, ..., alpha_d)`` with ``|alpha| = N``.  Every operator in
the package uses the ordering produced by :func:`multi_indices`: graded on
``(alpha_1, ..., alpha_d)`` (so ``alpha_0`` descends), ties broken by
descending lexicographic order.  For ``N = 1`` this gives ``e_0, ..., e_d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import eval_jacobi, gammaln

from .quadrature import QuadratureRule, make_rule, simplex_volume

BARY_TOL = 1e-12


def num_basis(N: int, d: int) -> int:
    """Dimension of total-degree ``N`` polynomials in ``d`` variables."""
    if N < 0:
        return 0
    return comb(N + d, d)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_indices(N: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All ``alpha`` with ``|alpha| = N`` in ``d + 1`` entries, canonical order."""
    if N < 0:
        raise ValueError("degree must be non-negative")
    out = []
    for grade in range(N + 1):
        for rest in _compositions(grade, d):
            out.append((N - grade,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def index_lookup(N: int, d: int) -> dict[tuple[int, ...], int]:
    """Map from multi-index to its position in :func:`multi_indices`."""
    return {a: i for i, a in enumerate(multi_indices(N, d))}


def multi_index_array(N: int, d: int) -> np.ndarray:
    return np.array(multi_indices(N, d), dtype=int).reshape(-1, d + 1)


def multinomial(alpha) -> int:
    return factorial(sum(alpha)) // prod(factorial(a) for a in alpha)


def eval_bernstein(N: int, d: int, bary: np.ndarray) -> np.ndarray:
    """Bernstein basis values, shape ``(num_points, Np)``.

    ``bary`` holds barycentric coordinates, one row per point.  Rows whose
    entries do not sum to one (within ``1e-12``) are rejected.
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    if bary.shape[1] != d + 1:
        raise ValueError(f"expected {d + 1} barycentric coordinates per point")
    if np.any(np.abs(bary.sum(axis=1) - 1.0) > BARY_TOL):
        raise ValueError("barycentric coordinates must sum to 1")
    alphas = multi_index_array(N, d)
    coef = np.array([multinomial(a) for a in alphas], dtype=float)
    vals = np.ones((bary.shape[0], len(alphas)))
    for i in range(d + 1):
        vals *= bary[:, i : i + 1] ** alphas[:, i][None, :]
    return vals * coef[None, :]


def _coo_to_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


@lru_cache(maxsize=None)
def elevation_matrix(N_from: int, d: int) -> sp.csr_matrix:
    """One-degree elevation, degree ``N_from`` -> ``N_from + 1`` coefficients.

    Entry ``(beta, beta - e_j)`` is ``beta_j / (N_from + 1)``.  The transpose
    is the one-degree reduction.
    """
    N = N_from + 1
    hi = multi_indices(N, d)
    lo = index_lookup(N_from, d)
    rows, cols, vals = [], [], []
    for r, beta in enumerate(hi):
        for j in range(d + 1):
            if beta[j] > 0:
                a = list(beta)
                a[j] -= 1
                rows.append(r)
                cols.append(lo[tuple(a)])
                vals.append(beta[j] / N)
    return _coo_to_csr(rows, cols, vals, (len(hi), len(lo)))


def elevation_chain(N_from: int, N_to: int, d: int) -> np.ndarray:
    """Dense elevation ``N_from -> N_to`` as a product of one-degree steps."""
    if N_to < N_from:
        raise ValueError("N_to must be >= N_from")
    E = np.eye(num_basis(N_from, d))
    for n in range(N_from, N_to):
        E = elevation_matrix(n, d) @ E
    return np.asarray(E)


@lru_cache(maxsize=None)
def barycentric_derivative(N: int, d: int, i: int) -> sp.csr_matrix:
    """Derivative along ``lambda_i`` re-expressed at degree ``N``.

    Row ``gamma`` couples to ``gamma - e_j + e_i`` with weight ``gamma_j``,
    so each row has at most ``d + 1`` nonzeros.
    """
    idx = multi_indices(N, d)
    look = index_lookup(N, d)
    rows, cols, vals = [], [], []
    for r, g in enumerate(idx):
        for j in range(d + 1):
            if g[j] > 0:
                a = list(g)
                a[j] -= 1
                a[i] += 1
                rows.append(r)
                cols.append(look[tuple(a)])
                vals.append(float(g[j]))
    return _coo_to_csr(rows, cols, vals, (len(idx), len(idx)))


def reference_derivatives(N: int, d: int) -> list[sp.csr_matrix]:
    """``D_r, D_s(, D_t)`` from ``d(lambda_0)/dr_k = -1/2``, ``d(lambda_{k+1})/dr_k = 1/2``."""
    D0 = barycentric_derivative(N, d, 0)
    return [(0.5 * (barycentric_derivative(N, d, k + 1) - D0)).tocsr() for k in range(d)]


# -- orthonormal modal basis ---------------------------------------------------


def _jacobi_normalized(n: int, a: float, b: float, x: np.ndarray) -> np.ndarray:
    lognorm = (
        (a + b + 1) * np.log(2.0)
        - np.log(2 * n + a + b + 1)
        + gammaln(n + a + 1)
        + gammaln(n + b + 1)
        - gammaln(n + a + b + 1)
        - gammaln(n + 1)
    )
    return eval_jacobi(n, a, b, x) / np.exp(0.5 * lognorm)


def modal_degrees(N: int, d: int) -> list[tuple[int, ...]]:
    """Dubiner mode labels ordered by ascending total degree."""
    out = []
    for k in range(N + 1):
        for lab in _compositions(k, d):
            out.append(lab)
    return out


def eval_modal(N: int, d: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Dubiner basis at reference points ``x`` (n, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    modes = modal_degrees(N, d)
    out = np.empty((x.shape[0], len(modes)))
    if d == 2:
        r, s = x[:, 0], x[:, 1]
        den = 1.0 - s
        safe = np.abs(den) > 1e-14
        a = np.where(safe, 2.0 * (1 + r) / np.where(safe, den, 1.0) - 1.0, -1.0)
        b = s
        for m, (i, j) in enumerate(modes):
            out[:, m] = (
                np.sqrt(2.0)
                * _jacobi_normalized(i, 0, 0, a)
                * _jacobi_normalized(j, 2 * i + 1, 0, b)
                * (1 - b) ** i
            )
        return out
    if d == 3:
        r, s, t = x[:, 0], x[:, 1], x[:, 2]
        den_a = -s - t
        ok_a = np.abs(den_a) > 1e-14
        a = np.where(ok_a, 2.0 * (1 + r) / np.where(ok_a, den_a, 1.0) - 1.0, -1.0)
        den_b = 1.0 - t
        ok_b = np.abs(den_b) > 1e-14
        b = np.where(ok_b, 2.0 * (1 + s) / np.where(ok_b, den_b, 1.0) - 1.0, -1.0)
        c = t
        for m, (i, j, k) in enumerate(modes):
            out[:, m] = (
                2.0
                * np.sqrt(2.0)
                * _jacobi_normalized(i, 0, 0, a)
                * _jacobi_normalized(j, 2 * i + 1, 0, b)
                * (1 - b) ** i
                * _jacobi_normalized(k, 2 * i + 2 * j + 2, 0, c)
                * (1 - c) ** (i + j)
            )
        return out
    raise ValueError(f"unsupported dimension {d}")


@dataclass(frozen=True)
class ModalTransform:
    """Bernstein/modal change of basis and the mass-matrix spectrum.

    ``T`` maps orthonormal modal coefficients to Bernstein coefficients,
    ``M`` is the Bernstein mass matrix and ``eigenvalues[k]`` the eigenvalue
    of ``M`` shared by all modes of total degree ``k``.
    """

    N: int
    d: int
    T: np.ndarray
    M: np.ndarray
    eigenvalues: np.ndarray
    offdiag_residual: float


def bernstein_mass(N: int, d: int, rule: QuadratureRule | None = None) -> np.ndarray:
    rule = rule or make_rule(d, 2 * N)
    V = eval_bernstein(N, d, rule.bary)
    return V.T @ (rule.weights[:, None] * V)


def modal_transform(N: int, d: int, rule: QuadratureRule | None = None) -> ModalTransform:
    if rule is None:
        rule = make_rule(d, 2 * N)
    if rule.degree < 2 * N:
        raise ValueError("quadrature must be exact for degree 2N")
    VB = eval_bernstein(N, d, rule.bary)
    VL = eval_modal(N, d, rule.points)
    M = VB.T @ (rule.weights[:, None] * VB)
    lu = sla.lu_factor(M)
    T = sla.lu_solve(lu, VB.T @ (rule.weights[:, None] * VL))
    D = sla.lu_solve(sla.lu_factor(T), M @ T)
    diag = np.diag(D)
    off = np.max(np.abs(D - np.diag(diag))) if D.size > 1 else 0.0
    degs = np.array([sum(m) for m in modal_degrees(N, d)])
    eig = np.empty(N + 1)
    for k in range(N + 1):
        block = diag[degs == k]
        if np.ptp(block) > 1e-9 * max(1.0, abs(block).max()):
            raise ArithmeticError(f"inconsistent eigenvalues in modal degree {k}")
        eig[k] = block.mean()
    return ModalTransform(N, d, T, M, eig, float(off))


@lru_cache(maxsize=None)
def mass_eigenvalues(N: int, d: int) -> np.ndarray:
    """Distinct eigenvalues of the degree-``N`` Bernstein mass matrix."""
    return modal_transform(N, d).eigenvalues


@dataclass(frozen=True)
class BasisTables:
    N: int
    d: int
    Np: int
    T: np.ndarray
    M: np.ndarray
    eigenvalues: np.ndarray
    Dbary: tuple
    Dref: tuple


class SparsityError(ArithmeticError):
    pass


def derivative_matrices(N: int, d: int, rule: QuadratureRule | None = None):
    """Sparse barycentric and reference derivative matrices.

    The barycentric matrices come from the exact stencil; each reference
    combination is cross-checked against ``M^{-1} S`` assembled with
    ``rule`` and must agree to 1e-10 after thresholding at 1e-12.
    """
    Dbary = [barycentric_derivative(N, d, i) for i in range(d + 1)]
    for Di in Dbary:
        if np.diff(Di.indptr).max(initial=0) > d + 1:
            raise SparsityError("barycentric derivative exceeds d+1 nonzeros per row")
    Dref = reference_derivatives(N, d)
    rule = rule or make_rule(d, 2 * N)
    VB = eval_bernstein(N, d, rule.bary)
    M = VB.T @ (rule.weights[:, None] * VB)
    dV = _bernstein_grad(N, d, rule.bary)
    for k in range(d):
        S = VB.T @ (rule.weights[:, None] * dV[k])
        Dnum = np.linalg.solve(M, S)
        Dnum[np.abs(Dnum) < 1e-12 * max(1.0, np.abs(Dnum).max())] = 0.0
        if np.max(np.abs(Dnum - Dref[k].toarray())) > 1e-10 * max(1.0, np.abs(Dnum).max()):
            raise ArithmeticError("derivative stencil disagrees with quadrature assembly")
    return Dbary, Dref


def _bernstein_grad(N: int, d: int, bary: np.ndarray) -> list[np.ndarray]:
    """Reference-coordinate gradients of the Bernstein basis at points."""
    if N == 0:
        return [np.zeros((bary.shape[0], 1)) for _ in range(d)]
    Vlow = eval_bernstein(N - 1, d, bary)
    # d/dlambda_i B^N_alpha = N B^{N-1}_{alpha - e_i}
    look = index_lookup(N - 1, d)
    alphas = multi_indices(N, d)
    dlam = np.zeros((d + 1, bary.shape[0], len(alphas)))
    for col, a in enumerate(alphas):
        for i in range(d + 1):
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                dlam[i, :, col] = N * Vlow[:, look[tuple(b)]]
    return [0.5 * (dlam[k + 1] - dlam[0]) for k in range(d)]


def bernstein_gradient(N: int, d: int, bary: np.ndarray) -> list[np.ndarray]:
    return _bernstein_grad(N, d, np.atleast_2d(bary))


@lru_cache(maxsize=None)
def basis_tables(N: int, d: int) -> BasisTables:
    mt = modal_transform(N, d)
    Dbary, Dref = derivative_matrices(N, d)
    return BasisTables(N, d, num_basis(N, d), mt.T, mt.M, mt.eigenvalues,
                       tuple(Dbary), tuple(Dref))


def dump_coo(mat, path) -> None:
    """Write ``row col value`` lines for the nonzeros of ``mat``."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")


def reference_vertices(d: int) -> np.ndarray:
    return np.vstack([-np.ones(d), -np.ones(d) + 2 * np.eye(d)])


def reference_measure(d: int) -> float:
    return simplex_volume(d)
