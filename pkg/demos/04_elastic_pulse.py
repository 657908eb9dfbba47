"""Elastic velocity-stress update in a heterogeneous solid.

Compares the fast and quadrature weighted updates on one right-hand side,
then advances a velocity pulse and reports the energy.
"""

import numpy as np

from bbwadg.mesh import uniform_mesh
from bbwadg.quadrature import make_rule
from bbwadg.solver import ElasticSolver, elastic_energy, integrate, sample_on_rule, time_step
from bbwadg.studies import constant_wavespeed, sine_wavespeed
from bbwadg.wadg import quadrature_operators

N, M = 3, 1
mesh = uniform_mesh(3, 2)
rho = constant_wavespeed(1.0)
mu, lam = sine_wavespeed(1), sine_wavespeed(2)

rule = make_rule(3, 2 * N + 2)
Pq = quadrature_operators(N, 3, rule).Pq


def pulse(solver):
    state = solver.zero_state()
    state[0] = Pq @ sample_on_rule(mesh, rule, lambda x: np.exp(-10 * np.sum(x**2, axis=-1)))
    return state


fast = ElasticSolver(mesh, N, rho, mu, lam, M=M, mode="fast")
slow = ElasticSolver(mesh, N, rho, mu, lam, M=M, mode="oracle")
s0 = pulse(fast)
diff = max(np.abs(a - b).max() for a, b in zip(fast.rhs(s0, 0.0), slow.rhs(s0, 0.0)))
print(f"fast vs quadrature right-hand side: {diff:.2e}")

dt, nsteps = time_step(mesh, N, fast.c_max, 0.25)
e0 = elastic_energy(fast, s0)
integrate(s0, fast.rhs, dt, nsteps)
print(f"{nsteps} steps, energy {e0:.6f} -> {elastic_energy(fast, s0):.6f}")
