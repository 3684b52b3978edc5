"""
The constraint forced by a singular Hessian
===========================================

A charged defective rotator must keep n.(v/c x H + E) = 0, whatever the
charge or field strength.  Initial data that violate it are refused.  The
helical motion in a uniform magnetic field respects it, and so does the
plane-confined family in a uniform electric field, with a caveat shown at
the end.
"""

import math
import warnings

import numpy as np

from rotators import analytic as A, dynamics as D, mechanics as M
from rotators.errors import ConstraintViolatedAtStart
from rotators.model import FieldConfig, RotatorParams, RotatorState

p = RotatorParams(a1=-1.0, a2=1.0, charge=0.5)
s = RotatorState(0.0, [0, 0, 0], [0.05, -0.02, 0.03], [0.6, 0.8, 0.0], [0, 0, 0.7])
fld = FieldConfig.uniform_h([0.0, 0.0, 0.5])
print("constraint residual at the start:", M.lorentz_constraint_residual(s, fld))
try:
    D.integrate(p, s, fld, D.IntegratorConfig(1e-2, 1.0), D.GaugeFrequency.constant(s.omega))
except ConstraintViolatedAtStart as exc:
    print("refused:", exc)

# helix about H0
helix = A.example2_helix(RotatorParams(a1=-1.0, a2=1.0, ell=0.01), 0.5, 0.05, 1.0, [0, 0, 0.1])
h0 = helix.state(0.0)
tr = D.integrate(helix.params, h0, helix.field, D.IntegratorConfig(1e-3, 20.0),
                 D.GaugeFrequency.constant(h0.omega))
print(f"helix: omega {helix.omega:.6f}, axial speed {helix.v_axial:.4f}")
print(f"  integrated vs closed form at t = 20: {np.abs(tr.x[-1] - helix.state(20.0).x).max():.2e}")
print(f"  largest constraint residual along the run: {np.abs(tr.lorentz_residual).max():.2e}")

# planar branches: only the co-rotating one exists for R > -a1 l
for b in A.example2_planar_frequencies(RotatorParams(a1=-1.0, a2=1.0, ell=0.1), 1.0, 0.1):
    print(f"  planar branch omega {b.omega:.6f}, valid {b.valid} ({b.window})")

# electric field: n spins in the plane orthogonal to E with any psi(t)
pe = RotatorParams(a1=-1.0, a2=1.0, charge=1.0)
fam = A.example1_family(pe, 0.01, [0, 0, 0], [0.02, 0.01, 0],
                        lambda t: math.sin(0.3 * t) + 0.5 * t,
                        lambda t: 0.3 * math.cos(0.3 * t) + 0.5)
ts = np.linspace(0, 10, 21)
reduced = D.verify_solution(pe, fam, fam.field, times=ts, system="reduced")
full = D.verify_solution(pe, fam, fam.field, times=ts)
print(f"E-field family, plane-confined equations: residual {reduced.max_residual:.2e}")
print("  unconstrained equations, per coordinate:", np.array2string(full.per_equation, precision=2))
# the out-of-plane equation reduces to a1 m l Omega v_z, and v_z = e E t / m grows
pred = max(abs(pe.a1) * pe.m * pe.ell * fam.state(t).omega * abs(fam.state(t).v[2]) for t in ts)
print(f"  largest |a1 m l Omega v_z| on the same samples: {pred:.2e}")
