"""
Regular and defective rotators
==============================

The velocity Hessian of the rotator Lagrangian is non-singular unless
a2 = a1**2.  This script compares the closed-form determinant with the
finite-difference one, shows the one-dimensional kernel of the defective
case and checks the linear dependence of its equations of motion at a
state that is not on any solution.
"""

import numpy as np

from rotators import mechanics as M
from rotators.model import RotatorParams, RotatorState, to_chart

regular = RotatorParams(a1=-1.0, a2=2.0)
defective = RotatorParams(a1=-1.0, a2=1.0)

state = RotatorState(0.0, [0.1, -0.2, 0.3], [0.04, 0.01, -0.03], [0.6, 0.8, 0.0], [0.0, 0.0, 0.7])
chart = to_chart(state)

# determinant: closed form against finite differences
for name, p in (("regular", regular), ("defective", defective)):
    H = M.hessian_numeric(p, chart)
    print(f"{name:9s}  det closed {M.hessian_determinant_closed(p, chart): .6e}"
          f"  det numeric {np.linalg.det(H): .6e}  scaled {M.scaled_determinant(H): .2e}")

# the kernel of the defective Hessian is the nullifying direction
k = M.nullifying_kernel(defective, chart)
eta = M.nullifying_direction(defective, chart)
eta /= np.linalg.norm(eta)
print("kernel dimension", k.dim)
print("numeric kernel  ", np.round(k.vectors[0], 10))
print("closed form     ", np.round(eta, 10))

# the nullifying velocity variation costs nothing to second order
probe = M.nullifying_variation(defective, state)
print("Hessian form on the nullifying variation:", M.hessian_form_value(defective, state, probe))
print("same variation, regular rotator:        ", M.hessian_form_value(regular, state, probe))

# eta contracted with the Euler-Lagrange expressions vanishes for any state
print("eta . EL at an arbitrary state:", M.constraint_residual_general(defective, chart))
