"""Manufactured-solution refinement on triangles.

The wavespeed is c^2 = 1 + sin(pi x) sin(pi y) / 2, approximated by a
degree-M polynomial per element.  Lower M saturates the rate earlier.
"""

from bbwadg.studies import convergence_study

N = 3
for M in (0, 1, 2, None):
    mode = "oracle" if M is None else "fast"
    rows = convergence_study(2, N, M, levels=(2, 4, 8, 16), mode=mode, T=0.5)
    label = "exact weight" if M is None else f"M={M}"
    print(f"N={N}, {label}")
    for r in rows:
        print(f"  h={r['h']:.4f}  error={r['error']:.3e}  rate={r['rate']:.2f}")
