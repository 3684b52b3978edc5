"""Closed-form and quadrature solutions used to cross-check the integrator.

* The free path n(s) projected on p0: Y = n.p0/|p0| obeys
  (1 + mu Y)^2 Y'^2 = Q(Y),  Q(y) = a^2 + 2 mu y - (1 - mu^2) y^2 - 2 mu y^3 - mu^2 y^4,
  solved for s(Y) by quadrature.
* A degenerate rotator in a uniform electric field with n confined to the
  plane orthogonal to E (a family parametrised by an arbitrary psi(t)).
* A degenerate rotator in a uniform magnetic field moving on a helix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import mechanics
from .errors import DomainExceeded, FrequencySignViolation, NonDegenerateSystem, ZeroDenominator
from .model import FieldConfig, RotatorParams, RotatorState, is_degenerate

MU_WARN = 0.3
MIN_AMPLITUDE = 1e-6
REGIME_SPEED = 0.1  # fraction of c above which the non-relativistic model is stretched
_QUAD = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


def mu_parameter(params: RotatorParams, p0, omega: float) -> float:
    """mu = a1 |p0| / (a1 m c - (a2 - a1^2) m l Omega)."""
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    den = a1 * m * c - params.gap * m * ell * omega
    if den == 0.0:
        raise ZeroDenominator("a1 m c - (a2 - a1^2) m l Omega vanishes")
    return float(a1 * np.linalg.norm(p0) / den)


# ---------------------------------------------------------------------------
# quadrature solution of the free path
# ---------------------------------------------------------------------------


def _quartic(mu, a):
    """Coefficients of Q(y), highest power first."""
    return np.array([-mu * mu, -2 * mu, -(1 - mu * mu), 2 * mu, a * a])


@dataclass(frozen=True)
class QuadratureSolution:
    """Y(s) between consecutive turning points y_min < y_max.

    ``s0`` is the arc length at which Y reaches y_max.  The path is periodic
    in s with period 2 * half_period.
    """

    mu: float
    a_const: float
    s0: float
    p0: np.ndarray
    y_min: float
    y_max: float
    half_period: float
    _reduced: np.ndarray  # Q(y) / ((y_max - y)(y - y_min))

    @classmethod
    def from_initial(cls, mu, Y0, dY0, p0=None, s_init=0.0):
        """Fit the integration constant a to (Y, Y') at arc length ``s_init``."""
        mu, Y0, dY0 = float(mu), float(Y0), float(dY0)
        if abs(mu) > MU_WARN:
            warnings.warn(f"|mu| = {abs(mu):.3g} is not small; outside the non-relativistic regime")
        a2 = (1 + mu * Y0) ** 2 * dY0 ** 2 - 2 * mu * Y0 + (1 - mu * mu) * Y0 ** 2 \
            + 2 * mu * Y0 ** 3 + mu * mu * Y0 ** 4
        if a2 <= 0:
            raise DomainExceeded("initial data admit no oscillating solution")
        a = math.sqrt(a2)
        if a < MIN_AMPLITUDE:
            raise DomainExceeded(f"oscillation amplitude {a:.3g} is below {MIN_AMPLITUDE}")
        coeffs = _quartic(mu, a)
        # negligible leading terms only move roots far outside [-1, 1]
        lead = np.flatnonzero(np.abs(coeffs) > 1e-15 * np.abs(coeffs).max())[0]
        roots = np.roots(coeffs[lead:])
        real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
        tol = 1e-12 * max(1.0, abs(Y0))
        above, below = real[real > Y0 + tol], real[real < Y0 - tol]
        near = real[np.abs(real - Y0) <= tol]
        if len(near):
            # starting on a turning point: use Y0 itself, since a root error
            # of order eps would shift s0 by order sqrt(eps)
            if np.polyval(coeffs, Y0 + 1e-6) > 0:
                below = np.append(below, Y0)
            else:
                above = np.insert(above, 0, Y0)
        if not len(above) or not len(below):
            raise DomainExceeded("could not bracket Y between turning points")
        y_max, y_min = float(above.min()), float(below.max())
        quotient, _ = np.polydiv(coeffs, -np.poly([y_max, y_min]))
        sol = cls(mu, a, 0.0, None if p0 is None else np.asarray(p0, float),
                  y_min, y_max, 0.0, np.atleast_1d(quotient))
        half = sol._integral(0.0)
        u0 = sol._integral(sol._phi(Y0))
        s0 = s_init - u0 if dY0 <= 0 else s_init + u0
        return cls(mu, a, s0, sol.p0, y_min, y_max, half, sol._reduced)

    # y = c_m - r cos(phi) maps phi in [0, pi] onto [y_min, y_max]; the
    # inverse square roots at the turning points cancel against dy.
    def _phi(self, Y):
        cm, r = 0.5 * (self.y_max + self.y_min), 0.5 * (self.y_max - self.y_min)
        return math.acos(min(1.0, max(-1.0, (cm - Y) / r)))

    def _integrand(self, phi):
        cm, r = 0.5 * (self.y_max + self.y_min), 0.5 * (self.y_max - self.y_min)
        y = cm - r * math.cos(phi)
        return (1 + self.mu * y) / math.sqrt(np.polyval(self._reduced, y))

    def _integral(self, phi):
        """int_Y^{y_max} (1 + mu y) dy / sqrt(Q(y)) with Y = Y(phi)."""
        return quad(self._integrand, phi, math.pi, **_QUAD)[0]

    @property
    def period(self) -> float:
        return 2 * self.half_period

    def Q(self, y):
        return np.polyval(_quartic(self.mu, self.a_const), y)

    def table(self, npts=201):
        """Monotone table of (Y, s) on the descending branch after s0."""
        Y = np.linspace(self.y_max, self.y_min, npts)
        return np.array([(y, s_of_Y(self, y)) for y in Y])


def s_of_Y(sol: QuadratureSolution, Y: float, branch: str = "descending") -> float:
    """Arc length at which Y is reached on the half period adjacent to s0."""
    tol = 1e-12 * max(1.0, abs(Y))
    if Y > sol.y_max + tol or Y < sol.y_min - tol:
        raise DomainExceeded(f"Y = {Y} lies outside the turning points [{sol.y_min}, {sol.y_max}]")
    u = sol._integral(sol._phi(Y))
    if branch == "descending":
        return sol.s0 + u
    if branch == "ascending":
        return sol.s0 - u
    raise ValueError(f"unknown branch {branch!r}")


def Y_of_s(sol: QuadratureSolution, s: float) -> float:
    """Invert s(Y), extended periodically."""
    u = (s - sol.s0) % sol.period
    if u > sol.half_period:
        u = sol.period - u
    if u <= 0.0:
        return sol.y_max
    if u >= sol.half_period:
        return sol.y_min
    phi = brentq(lambda ph: sol._integral(ph) - u, 0.0, math.pi, xtol=1e-15, rtol=1e-15)
    cm, r = 0.5 * (sol.y_max + sol.y_min), 0.5 * (sol.y_max - sol.y_min)
    return cm - r * math.cos(phi)


def circle_approximation(sol: QuadratureSolution, s):
    """Small-mu approximation mu + (y_max - mu) cos(s - s0)."""
    return sol.mu + (sol.y_max - sol.mu) * np.cos(np.asarray(s, float) - sol.s0)


def quadrature_for_state(params: RotatorParams, state: RotatorState) -> QuadratureSolution:
    """Quadrature solution matching a free rotator state (s measured from t = state.t)."""
    omega = float(np.linalg.norm(state.ndot))
    p0 = mechanics.canonical_momenta(params, state).p
    norm = float(np.linalg.norm(p0))
    if norm == 0.0:
        raise ValueError("Y is undefined when p0 = 0 (the path is a great circle)")
    e = p0 / norm
    mu = mu_parameter(params, p0, omega)
    return QuadratureSolution.from_initial(mu, e @ state.n, e @ state.ndot / omega, p0)


# ---------------------------------------------------------------------------
# degenerate rotator in a uniform electric field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanarFamily:
    """Motions with n = (cos psi, sin psi, 0) in E = (0, 0, E0).

    x(t) = x0 + v0 t + (a1 l eps sin psi, -a1 l eps cos psi, z_coeff t^2),
    eps = sgn(dpsi).  By default z_coeff = e E0 / (2 m).
    """

    params: RotatorParams
    E0: float
    x0: np.ndarray
    v0: np.ndarray
    psi: Callable
    dpsi: Callable
    eps: float
    z_coeff: float

    @property
    def field(self) -> FieldConfig:
        return FieldConfig.uniform_e([0.0, 0.0, self.E0])

    def _angles(self, t):
        psi, dpsi = float(self.psi(t)), float(self.dpsi(t))
        if dpsi == 0.0 or math.copysign(1.0, dpsi) != self.eps:
            raise DomainExceeded(f"dpsi changes sign or vanishes at t = {t}; psi must be monotone")
        return psi, dpsi

    def state(self, t) -> RotatorState:
        psi, dpsi = self._angles(t)
        g = self.params.a1 * self.params.ell * self.eps
        cs, sn = math.cos(psi), math.sin(psi)
        x = self.x0 + self.v0 * t + np.array([g * sn, -g * cs, self.z_coeff * t * t])
        v = self.v0 + np.array([g * cs * dpsi, g * sn * dpsi, 2 * self.z_coeff * t])
        return RotatorState(t, x, v, [cs, sn, 0.0], [-sn * dpsi, cs * dpsi, 0.0])

    def reduced_system(self):
        """(L_E, coords, labels) for the plane-confined four-coordinate system."""
        m, ell, c, a1, a2, e = (self.params.m, self.params.ell, self.params.c,
                                self.params.a1, self.params.a2, self.params.charge)
        eE = e * self.E0

        def L(q, qdot, t):
            vx, vy, vz, w = qdot
            return 0.5 * m * (vx * vx + vy * vy + vz * vz) + 0.5 * a2 * m * ell * ell * w * w \
                - a1 * m * ell * abs(w) * (c + vx * math.cos(q[3]) + vy * math.sin(q[3])) + eE * q[2]

        def coords(t):
            s = self.state(t)
            return np.array([*s.x, float(self.psi(t))])

        return L, coords, ("x", "y", "z", "psi")


def example1_family(params: RotatorParams, E0: float, x0, v0, psi: Callable, dpsi: Callable,
                    z_coeff: Optional[float] = None) -> PlanarFamily:
    """Sampler for the psi-family; ``dpsi`` is the derivative of ``psi``."""
    if not is_degenerate(params):
        raise NonDegenerateSystem("the psi-family exists only for a2 = a1**2")
    if z_coeff is None:
        z_coeff = params.charge * E0 / (2 * params.m)
    d0 = float(dpsi(0.0))
    if d0 == 0.0:
        raise DomainExceeded("dpsi(0) must be nonzero")
    return PlanarFamily(params, float(E0), np.asarray(x0, float), np.asarray(v0, float),
                        psi, dpsi, math.copysign(1.0, d0), float(z_coeff))


# ---------------------------------------------------------------------------
# degenerate rotator in a uniform magnetic field
# ---------------------------------------------------------------------------


def _axis_frame(H0):
    """Rotation whose third column is H0/|H0| (identity for H0 along +z)."""
    h = np.asarray(H0, float)
    norm = np.linalg.norm(h)
    if norm == 0.0 or np.allclose(h / norm, [0, 0, 1], atol=1e-15):
        return np.eye(3)
    z = h / norm
    seed = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    xa = seed - (seed @ z) * z
    xa /= np.linalg.norm(xa)
    return np.column_stack([xa, np.cross(z, xa), z])


@dataclass(frozen=True)
class HelicalSolution:
    """x = x0 + (-R sin wt, R cos wt, v t), n = (cos a cos wt, cos a sin wt, sin a) about H0."""

    R: float
    alpha: float
    omega: float
    omega_L: float
    v_axial: float
    Q: float
    H0: np.ndarray
    x0: np.ndarray
    params: RotatorParams
    outside_regime: bool = False

    @property
    def field(self) -> FieldConfig:
        return FieldConfig.uniform_h(self.H0, c=self.params.c)

    def state(self, t) -> RotatorState:
        F = _axis_frame(self.H0)
        w, R, ca, sa = self.omega, self.R, math.cos(self.alpha), math.sin(self.alpha)
        cs, sn = math.cos(w * t), math.sin(w * t)
        x = self.x0 + F @ np.array([-R * sn, R * cs, self.v_axial * t])
        v = F @ np.array([-R * w * cs, -R * w * sn, self.v_axial])
        n = F @ np.array([ca * cs, ca * sn, sa])
        ndot = F @ np.array([-ca * w * sn, ca * w * cs, 0.0])
        return RotatorState(t, x, v, n, ndot)


def example2_helix(params: RotatorParams, R: float, alpha: float, Q: float, H0,
                   x0=(0.0, 0.0, 0.0)) -> HelicalSolution:
    """Helical motion of a rotator with charge e = -Q in the uniform field H0."""
    if not is_degenerate(params):
        raise NonDegenerateSystem("the helical solution is derived for a2 = a1**2")
    if not R > 0 or not Q > 0:
        raise ValueError("R and Q must be positive")
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    H0 = np.asarray(H0, float)
    omega_L = Q * float(np.linalg.norm(H0)) / (m * c)
    den = a1 * (ell / R) * math.cos(alpha) ** 2 + 1.0
    if den <= 0:
        raise FrequencySignViolation(
            f"omega > 0 requires R > -a1 l cos^2(alpha) = {-a1 * ell * math.cos(alpha) ** 2:.6g}")
    omega = omega_L / den
    cos2a = math.cos(2 * alpha)
    if abs(cos2a) < 1e-12:
        raise ZeroDenominator("cos(2 alpha) vanishes")
    v = c * math.sin(alpha) / cos2a * (1 - 2 * R * omega / c * (1 + a1 * ell / (2 * R)) * math.cos(alpha))
    speed = math.hypot(R * omega, v)
    outside = speed > REGIME_SPEED * c
    if outside:
        warnings.warn(f"centre-of-mass speed {speed:.3g} exceeds {REGIME_SPEED} c")
    return HelicalSolution(R, alpha, omega, omega_L, v, Q, H0, np.asarray(x0, float),
                           params.replace(charge=-Q), outside)


@dataclass(frozen=True)
class PlanarBranch:
    omega: float
    valid: bool
    window: str
    nullifying_admissible: bool


def example2_planar_frequencies(params: RotatorParams, R: float, omega_L: float):
    """The two co-rotational planar solutions (alpha = 0) of the magnetic problem.

    Each branch carries its validity window and whether a nullifying
    variation (-a1 l dphi = R |dphi|) is compatible with it.
    """
    if not is_degenerate(params):
        raise NonDegenerateSystem("the planar branches are derived for a2 = a1**2")
    if not R > 0:
        raise ValueError("R must be positive")
    a1l = params.a1 * params.ell
    out = []
    for sign, valid, window in ((1.0, R > -a1l, "R > -a1 l"), (-1.0, R < a1l, "R < a1 l")):
        den = 1.0 + sign * a1l / R
        w = omega_L / den if den != 0 else math.inf
        admissible = math.isfinite(w) and math.isclose(-a1l * w, R * abs(w), rel_tol=1e-12)
        out.append(PlanarBranch(w, bool(valid), window, admissible))
    return tuple(out)


def planar_hessian_constraint(r, rdot, psi, dpsi, phi) -> float:
    """rdot cos(phi - psi) + r dpsi sin(phi - psi) for planar motion in a magnetic field."""
    return rdot * math.cos(phi - psi) + r * dpsi * math.sin(phi - psi)
