"""Weight-adjusted mass-inverse application.

Two interchangeable routes apply ``(M^k)^{-1} M^k_w`` to degree-``N``
coefficients:

* ``"oracle"``: quadrature, ``P_q diag(w(x_q)) V_q u``;
* ``"fast"``: Bernstein product with the degree-``M`` weight followed by the
  telescoping L2 projection back to degree ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .bernstein import bernstein_mass, eval_bernstein, num_basis
from .polyalg import (
    apply_projection_telescoping,
    multiplication_stencil,
    multiply_general,
    projection_decomposition,
)
from .quadrature import QuadratureRule, make_rule

MODES = ("oracle", "fast")


class WeightError(ValueError):
    """Raised for weights that are not strictly positive (or not positive definite)."""


@dataclass(frozen=True)
class QuadratureOperators:
    """``V_q`` (points x Np) and ``P_q = M^{-1} V_q^T diag(w)``."""

    N: int
    rule: QuadratureRule
    Vq: np.ndarray
    Pq: np.ndarray


def quadrature_operators(N: int, d: int, rule: QuadratureRule | None = None) -> QuadratureOperators:
    rule = rule or make_rule(d, 2 * N + 1)
    Vq = eval_bernstein(N, d, rule.bary)
    M = bernstein_mass(N, d)
    Pq = sla.lu_solve(sla.lu_factor(M), Vq.T * rule.weights[None, :])
    return QuadratureOperators(N, rule, Vq, Pq)


def quadrature_wadg_apply(u: np.ndarray, w_at_points: np.ndarray, ops: QuadratureOperators,
                          counter=None) -> np.ndarray:
    """L2 projection of ``w * u`` onto degree ``N`` using quadrature."""
    w = np.asarray(w_at_points, dtype=float)
    if np.any(w <= 0):
        raise WeightError("weight must be strictly positive at quadrature points")
    if w.ndim == 1 and np.ndim(u) == 2:
        w = w[:, None]
    if counter is not None:
        nq, Np = ops.Vq.shape
        counter.add(2 * nq * Np + nq)
    return ops.Pq @ (w * (ops.Vq @ u))


# -- material fields ------------------------------------------------------------------------


class MaterialProjector:
    """L2 projection of per-element weight samples onto degree ``M``.

    ``calls`` counts projections so that a solver can assert none happen
    inside its time loop.
    """

    def __init__(self, M: int, d: int, rule: QuadratureRule):
        self.M, self.d, self.rule = M, d, rule
        V = eval_bernstein(M, d, rule.bary)
        self._P = np.linalg.solve(V.T @ (rule.weights[:, None] * V), V.T * rule.weights[None, :])
        self._V = V
        self.calls = 0

    def __call__(self, values: np.ndarray, check_positive: bool = True) -> np.ndarray:
        """``values`` are samples ``(num_points, K)`` at the rule's points."""
        self.calls += 1
        coeffs = self._P @ values
        if check_positive and np.any(self._V @ coeffs <= 0):
            raise WeightError("projected weight is not positive at every quadrature point")
        return coeffs


def project_material(values: np.ndarray, M: int, d: int, rule: QuadratureRule,
                     check_positive: bool = True) -> np.ndarray:
    return MaterialProjector(M, d, rule)(values, check_positive)


# -- scalar weights ----------------------------------------------------------------------------


class WadgOperator:
    """Apply ``(M^k)^{-1} M^k_w`` element-wise for a scalar weight.

    In ``fast`` mode ``weight_coeffs`` ``(Mp, K)`` must be given.  In
    ``oracle`` mode the weight is sampled at the quadrature points: either
    from ``weight_coeffs`` (same polynomial weight as the fast path, rule of
    degree ``2N + M``) or from ``weight_values`` already sampled on
    ``rule`` (full WADG, rule of degree ``2N + 1`` by default).
    """

    def __init__(self, mode: str, N: int, d: int, M: int | None = None,
                 weight_coeffs: np.ndarray | None = None,
                 weight_values: np.ndarray | None = None,
                 rule: QuadratureRule | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.mode, self.N, self.d, self.M = mode, N, d, M
        if mode == "fast":
            if weight_coeffs is None or M is None:
                raise ValueError("fast mode needs degree-M weight coefficients")
            if weight_coeffs.shape[0] != num_basis(M, d):
                raise ValueError("weight coefficients do not match degree M")
            self.stencil = multiplication_stencil(N, M, d)
            self.decomp = projection_decomposition(N, M, d)
            self.coeffs = weight_coeffs
            return
        if weight_coeffs is not None:
            rule = rule or make_rule(d, 2 * N + M)
            values = eval_bernstein(M, d, rule.bary) @ weight_coeffs
        else:
            if weight_values is None:
                raise ValueError("oracle mode needs weight coefficients or values")
            rule = rule or make_rule(d, 2 * N + 1)
            values = weight_values
        if np.any(values <= 0):
            raise WeightError("weight must be strictly positive at quadrature points")
        self.qops = quadrature_operators(N, d, rule)
        self.values = values

    def __call__(self, u: np.ndarray, counter=None) -> np.ndarray:
        if self.mode == "fast":
            h = multiply_general(u, self.coeffs, self.stencil, counter)
            return apply_projection_telescoping(h, self.decomp, counter)
        return quadrature_wadg_apply(u, self.values, self.qops, counter)


def acoustic_update(rhs_p: np.ndarray, op: WadgOperator, counter=None) -> np.ndarray:
    """Apply the ``c^2``-weighted mass inverse factor to the pressure RHS."""
    return op(rhs_p, counter)


# -- isotropic elastic weights -------------------------------------------------------------


class ElasticWadg:
    """Weighted updates for velocities (``1/rho``) and stresses (isotropic ``C``).

    Stress rows use ``C_ij = lam + 2 mu delta_ij`` (normal block) and
    ``C_ii = mu`` (shear).  The fast path forms the degree-``N + M`` sum of
    products for each row and projects once per row.
    """

    def __init__(self, mode: str, N: int, d: int, M: int | None = None,
                 rho_inv=None, mu=None, lam=None, rule: QuadratureRule | None = None,
                 values: bool = False):
        if d != 3:
            raise ValueError("elastic system is implemented in 3D only")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.mode, self.N, self.d, self.M = mode, N, d, M
        if mode == "fast":
            if values:
                raise ValueError("fast mode needs polynomial coefficients")
            self.stencil = multiplication_stencil(N, M, d)
            self.decomp = projection_decomposition(N, M, d)
            self.rho_inv, self.mu, self.lam = rho_inv, mu, lam
            rule = rule or make_rule(d, 2 * N + M)
            V = eval_bernstein(M, d, rule.bary)
            _check_elastic(V @ rho_inv, V @ mu, V @ lam)
            return
        if values:
            rule = rule or make_rule(d, 2 * N + 1)
            r, m, l = rho_inv, mu, lam
        else:
            rule = rule or make_rule(d, 2 * N + M)
            V = eval_bernstein(M, d, rule.bary)
            r, m, l = V @ rho_inv, V @ mu, V @ lam
        _check_elastic(r, m, l)
        self.qops = quadrature_operators(N, d, rule)
        self.rho_inv, self.mu, self.lam = r, m, l

    def velocity(self, rhs_v, counter=None):
        return [self._apply_scalar(self.rho_inv, r, counter) for r in rhs_v]

    def stress(self, rhs_s, counter=None):
        tr = rhs_s[0] + rhs_s[1] + rhs_s[2]
        out = []
        if self.mode == "fast":
            mult = lambda f, g: multiply_general(f, g, self.stencil, counter)  # noqa: E731
            lam_tr = mult(tr, self.lam)
            for i in range(3):
                h = lam_tr + 2.0 * mult(rhs_s[i], self.mu)
                out.append(apply_projection_telescoping(h, self.decomp, counter))
            for i in range(3, 6):
                out.append(apply_projection_telescoping(mult(rhs_s[i], self.mu), self.decomp, counter))
            return out
        Vq, Pq = self.qops.Vq, self.qops.Pq
        tr_q = self.lam * (Vq @ tr)
        for i in range(3):
            out.append(Pq @ (tr_q + 2.0 * self.mu * (Vq @ rhs_s[i])))
        for i in range(3, 6):
            out.append(Pq @ (self.mu * (Vq @ rhs_s[i])))
        return out

    def _apply_scalar(self, w, u, counter):
        if self.mode == "fast":
            h = multiply_general(u, w, self.stencil, counter)
            return apply_projection_telescoping(h, self.decomp, counter)
        return quadrature_wadg_apply(u, w, self.qops, counter)


def _check_elastic(rho_inv, mu, lam):
    if np.any(rho_inv <= 0):
        raise WeightError("1/rho must be positive")
    if np.any(mu <= 0) or np.any(3 * lam + 2 * mu <= 0):
        raise WeightError("isotropic stiffness is not positive definite")


def elastic_update(rhs_v, rhs_s, op: ElasticWadg, counter=None):
    return op.velocity(rhs_v, counter), op.stress(rhs_s, counter)
