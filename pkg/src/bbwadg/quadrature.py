"""Collapsed-coordinate Gauss-Jacobi rules on the bi-unit simplex.

The reference simplex has vertices ``-1`` in every coordinate plus the unit
steps ``+2 e_i``; its measure is 2 for the triangle and 4/3 for the
tetrahedron.  Rules are tensor products of Gauss-Jacobi rules pulled back
through the Duffy map, so any exactness degree can be constructed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi


def simplex_volume(d: int) -> float:
    """Measure of the bi-unit reference simplex in ``d`` dimensions."""
    return 2.0**d / factorial(d)


def cart_to_bary(x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of reference points ``x`` of shape (n, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lam_rest = 0.5 * (1.0 + x)
    lam0 = 1.0 - lam_rest.sum(axis=1, keepdims=True)
    return np.hstack([lam0, lam_rest])


def bary_to_cart(lam: np.ndarray) -> np.ndarray:
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    return 2.0 * lam[:, 1:] - 1.0


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the reference simplex.

    ``points`` are reference (cartesian) coordinates, ``bary`` the matching
    barycentric coordinates; ``weights`` integrate in reference measure.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def bary(self) -> np.ndarray:
        return cart_to_bary(self.points)

    @property
    def num_points(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return self.weights @ values


def _gauss_jacobi(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    if alpha == 0:
        x, w = np.polynomial.legendre.leggauss(n)
        return x, w
    x, w = roots_jacobi(n, alpha, 0.0)
    return x, w


@lru_cache(maxsize=None)
def make_rule(d: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule exact for polynomials of total ``degree``.

    ``n = degree // 2 + 1`` points per collapsed direction, so the rule has
    ``n**d`` points and positive weights.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    n = degree // 2 + 1
    if d == 1:
        x, w = _gauss_jacobi(n, 0)
        return QuadratureRule(1, degree, x[:, None], w)
    if d == 2:
        a, wa = _gauss_jacobi(n, 0)
        b, wb = _gauss_jacobi(n, 1)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = np.outer(wa, wb) * 0.5
        r = 0.5 * (1 + A) * (1 - B) - 1
        s = B
        pts = np.column_stack([r.ravel(), s.ravel()])
        return QuadratureRule(2, degree, pts, W.ravel())
    if d == 3:
        a, wa = _gauss_jacobi(n, 0)
        b, wb = _gauss_jacobi(n, 1)
        c, wc = _gauss_jacobi(n, 2)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :] * 0.125
        r = 0.25 * (1 + A) * (1 - B) * (1 - C) - 1
        s = 0.5 * (1 + B) * (1 - C) - 1
        t = C
        pts = np.column_stack([r.ravel(), s.ravel(), t.ravel()])
        return QuadratureRule(3, degree, pts, W.ravel())
    raise ValueError(f"unsupported dimension {d}")


def monomial_integral(exponents) -> float:
    """Exact integral of ``prod(lambda_i**a_i)`` over the reference simplex."""
    exponents = tuple(int(a) for a in exponents)
    d = len(exponents) - 1
    num = factorial(d) * np.prod([factorial(a) for a in exponents], dtype=float)
    return simplex_volume(d) * num / factorial(sum(exponents) + d)
