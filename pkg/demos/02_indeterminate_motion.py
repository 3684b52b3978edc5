"""
One path, many motions
======================

A free defective rotator does not determine |ndot|(t).  Two runs from the
same initial data with different gauge frequencies trace the same path
n(s) on the sphere while their states at equal times drift apart.  Both
satisfy the Euler-Lagrange equations.
"""

import numpy as np

from rotators import dynamics as D
from rotators.errors import IndeterminateDynamics
from rotators.model import RotatorParams, RotatorState

p = RotatorParams(a1=-1.0, a2=1.0)
s0 = RotatorState(0.0, [0, 0, 0], [0.05, 0.02, 0.01], [1, 0, 0], [0, 0.5, 0.1])
w0 = s0.omega
cfg = D.IntegratorConfig(dt=1e-3, t_end=10.0)

try:
    D.integrate(p, s0, None, cfg)
except IndeterminateDynamics as exc:
    print("without a gauge:", exc)

steady = D.integrate(p, s0, None, cfg, D.GaugeFrequency.constant(w0))
wobbly = D.integrate(p, s0, None, cfg, D.GaugeFrequency.sinusoidal(w0, 0.3, 1.0))

print(f"distance between the sphere paths: {D.path_distance(steady, wobbly):.2e}")
print("n(10), constant gauge:   ", np.round(steady.n[-1], 6))
print("n(10), sinusoidal gauge: ", np.round(wobbly.n[-1], 6))
print("x(10), constant gauge:   ", np.round(steady.x[-1], 6))
print("x(10), sinusoidal gauge: ", np.round(wobbly.x[-1], 6))
for name, tr in (("constant", steady), ("sinusoidal", wobbly)):
    print(f"{name:10s} gauge, EL residual {D.verify_solution(p, tr).max_residual:.2e}")

# p^2/2m has the right value but the wrong flow: it freezes n
x_false, n_false = D.false_hamiltonian_flow(p, s0, steady.t)
print("largest |n - n_false| along the run:", np.abs(steady.n - n_false).max())
