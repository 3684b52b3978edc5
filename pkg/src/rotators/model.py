"""Domain types: rotator parameters, kinematic states, sphere charts, fields.

A rotator lives on R^3 x S^2: a position ``x`` and a unit direction ``n``.
States are immutable; numpy arrays stored on them are made read-only.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

STATE_TOL = 1e-12
CHART_MIN_SIN = 0.1

# chart x -> world y, chart y -> world z, chart z (polar axis) -> world x
_TILTED_FRAME = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _vec3(a, name="vector"):
    arr = np.array(a, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotatorParams:
    """Physical constants of a rotator plus its electric charge.

    ``a1`` and ``a2`` are the dimensionless shape coefficients multiplying
    the |ndot| and ndot**2 terms of the Lagrangian.
    """

    m: float = 1.0
    ell: float = 1.0
    c: float = 1.0
    a1: float = -1.0
    a2: float = 2.0
    charge: float = 0.0

    def __post_init__(self):
        for name in ("m", "ell", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if self.a1 == 0 and self.a2 == 0:
            raise ValueError("a1 = a2 = 0 describes a point particle, not a rotator")

    @property
    def gap(self) -> float:
        """a2 - a1**2; zero exactly for the defective rotators."""
        return self.a2 - self.a1 ** 2

    @property
    def beta(self) -> float:
        if self.a1 == 0:
            raise ZeroDivisionError("beta = a1 - a2/a1 is undefined for a1 = 0")
        return self.a1 - self.a2 / self.a1

    @property
    def degenerate(self) -> bool:
        return is_degenerate(self)

    def replace(self, **changes) -> "RotatorParams":
        return dataclasses.replace(self, **changes)


def params_from_shape(f_prime_0, f_double_prime_0, m=1.0, ell=1.0, c=1.0, charge=0.0):
    """Build parameters from the derivatives at 0 of the relativistic shape function."""
    return RotatorParams(m=m, ell=ell, c=c, a1=float(f_prime_0),
                         a2=-float(f_double_prime_0), charge=charge)


def is_degenerate(params: RotatorParams) -> bool:
    # exact comparison on purpose: degeneracy is a structural property of the inputs
    return params.a2 - params.a1 ** 2 == 0


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotatorState:
    """Kinematic snapshot (t, x, v, n, ndot) with |n| = 1 and n.ndot = 0."""

    t: float
    x: np.ndarray
    v: np.ndarray
    n: np.ndarray
    ndot: np.ndarray

    def __post_init__(self):
        for name in ("x", "v", "n", "ndot"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        object.__setattr__(self, "t", float(self.t))
        norm_err = abs(float(np.linalg.norm(self.n)) - 1.0)
        if norm_err > STATE_TOL:
            raise ValueError(f"|n| - 1 = {norm_err:.3e} exceeds {STATE_TOL}")
        tangency = abs(float(self.n @ self.ndot))
        if tangency > STATE_TOL * max(1.0, float(np.linalg.norm(self.ndot))):
            raise ValueError(f"n.ndot = {tangency:.3e} exceeds {STATE_TOL}")

    @classmethod
    def projected(cls, t, x, v, n, ndot) -> "RotatorState":
        """Build a state after normalising n and removing the normal part of ndot."""
        n = np.asarray(n, dtype=float)
        n = n / np.linalg.norm(n)
        ndot = np.asarray(ndot, dtype=float)
        ndot = ndot - (n @ ndot) * n
        return cls(t, x, v, n, ndot)

    @property
    def omega(self) -> float:
        """Rotation frequency |ndot|."""
        return float(np.linalg.norm(self.ndot))

    def replace(self, **changes) -> "RotatorState":
        return dataclasses.replace(self, **changes)


def sphere_basis(theta, phi):
    """Return u(theta, phi) and its partial derivatives d_theta u, d_phi u."""
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    u = np.array([st * cp, st * sp, ct])
    u_theta = np.array([ct * cp, ct * sp, -st])
    u_phi = np.array([-st * sp, st * cp, 0.0])
    return u, u_theta, u_phi


@dataclass(frozen=True)
class ChartState:
    """State in spherical chart coordinates aligned with ``frame``.

    n = frame @ [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)].
    Position and velocity stay in world coordinates.
    """

    frame: np.ndarray
    theta: float
    phi: float
    theta_dot: float
    phi_dot: float
    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.shape != (3, 3) or np.abs(frame.T @ frame - np.eye(3)).max() > 1e-12:
            raise ValueError("frame must be an orthonormal 3x3 matrix")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "x", _vec3(self.x, "x"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))
        for name in ("theta", "phi", "theta_dot", "phi_dot", "t"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def q(self) -> np.ndarray:
        """Generalised coordinates (x, y, z, theta, phi)."""
        return np.array([*self.x, self.theta, self.phi])

    @property
    def qdot(self) -> np.ndarray:
        """Generalised velocities (vx, vy, vz, theta_dot, phi_dot)."""
        return np.array([*self.v, self.theta_dot, self.phi_dot])

    @property
    def n(self) -> np.ndarray:
        u, _, _ = sphere_basis(self.theta, self.phi)
        return self.frame @ u

    @property
    def ndot(self) -> np.ndarray:
        _, u_t, u_p = sphere_basis(self.theta, self.phi)
        return self.frame @ (self.theta_dot * u_t + self.phi_dot * u_p)

    @property
    def tangent_basis(self):
        """World-frame vectors d n / d theta and d n / d phi."""
        _, u_t, u_p = sphere_basis(self.theta, self.phi)
        return self.frame @ u_t, self.frame @ u_p

    @classmethod
    def from_coords(cls, frame, q, qdot, t=0.0) -> "ChartState":
        return cls(frame, q[3], q[4], qdot[3], qdot[4], q[:3], qdot[:3], t)

    def replace(self, **changes) -> "ChartState":
        return dataclasses.replace(self, **changes)


def chart_frame_for(n) -> np.ndarray:
    """Identity frame unless n is within arcsin(0.1) of the z axis."""
    n = np.asarray(n, dtype=float)
    if math.hypot(n[0], n[1]) >= CHART_MIN_SIN:
        return np.eye(3)
    return _TILTED_FRAME.copy()


def to_chart(state: RotatorState, frame=None) -> ChartState:
    """Express a state in spherical coordinates.

    Without an explicit ``frame`` the chart polar axis is kept at least
    arcsin(0.1) away from n so the chart metric is well conditioned.
    """
    if frame is None:
        frame = chart_frame_for(state.n)
    frame = np.asarray(frame, dtype=float)
    u = frame.T @ state.n
    ud = frame.T @ state.ndot
    theta = math.atan2(math.hypot(u[0], u[1]), u[2])
    phi = math.atan2(u[1], u[0])
    _, u_t, u_p = sphere_basis(theta, phi)
    s2 = math.sin(theta) ** 2
    if s2 == 0.0:
        raise ValueError("n lies on the chart polar axis")
    theta_dot = float(ud @ u_t)
    phi_dot = float(ud @ u_p) / s2
    return ChartState(frame, theta, phi, theta_dot, phi_dot, state.x, state.v, state.t)


def from_chart(chart: ChartState) -> RotatorState:
    n = chart.n
    ndot = chart.ndot
    # remove rounding-level departures from the sphere
    n = n / np.linalg.norm(n)
    ndot = ndot - (n @ ndot) * n
    return RotatorState(chart.t, chart.x, chart.v, n, ndot)


# ---------------------------------------------------------------------------
# electromagnetic fields
# ---------------------------------------------------------------------------


class FieldKind(str, enum.Enum):
    NONE = "none"
    UNIFORM_E = "uniform_e"
    UNIFORM_H = "uniform_h"
    PLANE_WAVE = "plane_wave"


_ZERO = _vec3((0.0, 0.0, 0.0))


@dataclass(frozen=True)
class FieldConfig:
    """External field in Gaussian units.

    Gauges are fixed: uniform E uses Phi = -E0.x, A = 0; uniform H uses the
    symmetric gauge A = H0 x x / 2, Phi = 0; the plane wave uses
    A = (c/omega) E0 sin(k.x - omega t + phase), Phi = 0 with |k| = omega/c.
    """

    kind: FieldKind = FieldKind.NONE
    E0: np.ndarray = field(default_factory=lambda: _ZERO)
    H0: np.ndarray = field(default_factory=lambda: _ZERO)
    wave_k: np.ndarray = field(default_factory=lambda: _ZERO)
    wave_omega: float = 0.0
    wave_phase: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FieldKind(self.kind))
        for name in ("E0", "H0", "wave_k"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))
        if self.kind is FieldKind.UNIFORM_E and np.any(self.H0):
            raise ValueError("uniform_e field must have H0 = 0")
        if self.kind is FieldKind.UNIFORM_H and np.any(self.E0):
            raise ValueError("uniform_h field must have E0 = 0")
        if self.kind is FieldKind.PLANE_WAVE:
            k = float(np.linalg.norm(self.wave_k))
            if k == 0 or self.wave_omega <= 0:
                raise ValueError("plane wave needs a nonzero wave vector and omega > 0")
            if not math.isclose(k, self.wave_omega / self.c, rel_tol=1e-12):
                raise ValueError("plane wave must satisfy |k| = omega / c")
            if abs(self.E0 @ self.wave_k) > 1e-12 * k * max(1.0, np.linalg.norm(self.E0)):
                raise ValueError("plane wave amplitude must be transverse to k")

    @classmethod
    def none(cls, c=1.0):
        return cls(FieldKind.NONE, c=c)

    @classmethod
    def uniform_e(cls, E0, c=1.0):
        return cls(FieldKind.UNIFORM_E, E0=E0, c=c)

    @classmethod
    def uniform_h(cls, H0, c=1.0):
        return cls(FieldKind.UNIFORM_H, H0=H0, c=c)

    @classmethod
    def plane_wave(cls, E0, k, phase=0.0, c=1.0):
        k = np.asarray(k, dtype=float)
        return cls(FieldKind.PLANE_WAVE, E0=E0, wave_k=k,
                   wave_omega=c * float(np.linalg.norm(k)), wave_phase=phase, c=c)

    @property
    def is_none(self) -> bool:
        return self.kind is FieldKind.NONE


def field_eval(fld: FieldConfig, x, t):
    """Return (E, H, A, Phi) at position x and time t."""
    x = np.asarray(x, dtype=float)
    kind = fld.kind
    if kind is FieldKind.NONE:
        return np.zeros(3), np.zeros(3), np.zeros(3), 0.0
    if kind is FieldKind.UNIFORM_E:
        return np.array(fld.E0), np.zeros(3), np.zeros(3), -float(fld.E0 @ x)
    if kind is FieldKind.UNIFORM_H:
        return np.zeros(3), np.array(fld.H0), 0.5 * np.cross(fld.H0, x), 0.0
    phase = float(fld.wave_k @ x) - fld.wave_omega * t + fld.wave_phase
    cos_p, sin_p = math.cos(phase), math.sin(phase)
    E = fld.E0 * cos_p
    H = (fld.c / fld.wave_omega) * np.cross(fld.wave_k, fld.E0) * cos_p
    A = (fld.c / fld.wave_omega) * fld.E0 * sin_p
    return E, H, A, 0.0


def potentials(fld: FieldConfig, x, t):
    """Return (A, Phi) only; cheaper entry point for Lagrangian evaluation."""
    _, _, A, phi = field_eval(fld, x, t)
    return A, phi


def field_eval_many(fld: FieldConfig, X, T):
    """Vectorised :func:`field_eval` over positions X (N, 3) and times T (N,)."""
    X = np.asarray(X, dtype=float)
    T = np.broadcast_to(np.asarray(T, dtype=float), X.shape[:1])
    N = X.shape[0]
    zeros = np.zeros((N, 3))
    kind = fld.kind
    if kind is FieldKind.NONE:
        return zeros, zeros.copy(), zeros.copy(), np.zeros(N)
    if kind is FieldKind.UNIFORM_E:
        return np.tile(fld.E0, (N, 1)), zeros, zeros.copy(), -(X @ fld.E0)
    if kind is FieldKind.UNIFORM_H:
        return zeros, np.tile(fld.H0, (N, 1)), 0.5 * np.cross(fld.H0, X), np.zeros(N)
    phase = X @ fld.wave_k - fld.wave_omega * T + fld.wave_phase
    scale = fld.c / fld.wave_omega
    E = np.outer(np.cos(phase), fld.E0)
    H = np.outer(np.cos(phase), scale * np.cross(fld.wave_k, fld.E0))
    A = np.outer(np.sin(phase), scale * fld.E0)
    return E, H, A, np.zeros(N)
