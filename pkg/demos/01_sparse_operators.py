"""Sparse Bernstein operators behind the fast weighted update.

Prints the scalar coefficients of the degree-reducing projection, checks
the one-degree sweep application against a dense matrix, and compares
counted multiply-adds of the fast and quadrature updates.
"""

import numpy as np

from bbwadg.bernstein import elevation_matrix, num_basis
from bbwadg.polyalg import (
    apply_projection_telescoping,
    build_projection_direct,
    condition_number,
    projection_coeffs,
    projection_decomposition,
)
from bbwadg.studies import count_update_ops

d = 3

print("projection coefficients (tetrahedra)")
for N in (3, 5, 7):
    for M in (1, 2):
        c = projection_coeffs(N, M, d)
        print(f"  N={N} M={M}: " + " ".join(f"{x:+.4f}" for x in c)
              + f"   sum|c| = {condition_number(c):.2f}")

# one-degree elevation has at most d+1 entries per row
E = elevation_matrix(5, d)
print(f"\nelevation 5 -> 6: shape {E.shape}, max nnz/row {np.diff(E.tocsr().indptr).max()}")

rng = np.random.default_rng(0)
N, M = 6, 2
u = rng.standard_normal(num_basis(N + M, d))
sweeps = apply_projection_telescoping(u, projection_decomposition(N, M, d))
dense = build_projection_direct(N, M, d) @ u
print(f"sweeps vs dense projection (N={N}, M={M}): {np.abs(sweeps - dense).max():.2e}")

print("\nmultiply-adds per element, M=1")
for N in range(2, 9):
    ops = count_update_ops(N, 1, d)
    print(f"  N={N}: fast {ops['fast']:7d}   quadrature {ops['oracle']:8d}")
