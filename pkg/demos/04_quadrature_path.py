"""
The free path as a quadrature
=============================

For a free rotator the projection Y = n.p0/|p0| obeys a first-order
equation in arc length that integrates by quadrature.  The integrator
agrees with it to rounding error.  The naive circle mu + a cos(s - s0)
misses by an amount proportional to mu a^2.
"""

import math

import numpy as np

from rotators import analytic as A, dynamics as D
from rotators.model import RotatorParams, RotatorState

p = RotatorParams(a1=-1.0, a2=2.0)
omega, Y0 = 0.5, 0.55
p0 = 0.05 * (p.c * abs(p.a1) + p.gap * p.ell * omega) * np.array([1.0, 0.0, 0.0])
n = np.array([Y0, math.sqrt(1 - Y0 ** 2), 0.0])
s = RotatorState(0.0, [0, 0, 0], p0 / p.m + p.a1 * p.ell * omega * n, n, [0, 0, omega])

sol = A.quadrature_for_state(p, s)
print(f"mu = {sol.mu:.4f}, turning points [{sol.y_min:.6f}, {sol.y_max:.6f}], period {sol.period:.6f}")

tr = D.integrate(p, s, None, D.IntegratorConfig(1e-3, 4 * math.pi / omega))
Y = tr.n @ (sol.p0 / np.linalg.norm(sol.p0))
err = max(abs(A.Y_of_s(sol, tr.s[i]) - Y[i]) for i in range(0, len(tr), 50))
print(f"integrator vs quadrature: {err:.2e}")

print(" mu       a     circle error   error/(mu a^2)")
grid = np.linspace(0, 2 * math.pi, 200)
for a in (0.5, 0.2):
    for mu in (0.05, 0.025, 0.0125):
        q = A.QuadratureSolution.from_initial(mu, mu + a, 0.0)
        e = np.abs(np.array([A.Y_of_s(q, x) for x in grid]) - A.circle_approximation(q, grid)).max()
        print(f"{mu:.4f}  {a:.2f}   {e:.3e}      {e / (mu * a * a):.3f}")
