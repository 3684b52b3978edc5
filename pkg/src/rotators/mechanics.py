"""Closed-form mechanics of the rotator family.

Lagrangian

    L = m v^2/2 + a2 m l^2 ndot^2/2 - a1 m l c |ndot| (1 + n.v/c) + (e/c) A.v - e Phi

and everything derived from it: canonical momenta, the energy function,
the velocity Hessian (quadratic form, matrix, determinant, kernel), the
Lagrange multiplier of the sphere constraint, the Legendre inversion and
Hamiltonian, and the constraints that a singular Hessian imposes when the
rotator is charged.

Chart quantities use the velocity ordering (vx, vy, vz, theta_dot, phi_dot).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numdiff
from .errors import (DegenerateLegendreMap, DegenerateSystem, NonDegenerateSystem,
                     NonRotatingState, SignConditionViolated)
from .model import (ChartState, FieldConfig, RotatorParams, RotatorState, field_eval,
                    from_chart, is_degenerate, potentials)

KERNEL_RTOL = 1e-8


def _omega(ndot, what="operation"):
    omega = float(np.linalg.norm(ndot))
    if omega == 0.0:
        raise NonRotatingState(f"{what} requires |ndot| > 0")
    return omega


def _active(fld):
    return fld is not None and not fld.is_none


# ---------------------------------------------------------------------------
# Lagrangian, momenta, energy
# ---------------------------------------------------------------------------


def lagrangian_value(params: RotatorParams, state: RotatorState,
                     fld: Optional[FieldConfig] = None) -> float:
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    v, n, ndot = state.v, state.n, state.ndot
    omega = float(np.linalg.norm(ndot))
    if omega == 0.0 and a1 != 0:
        raise NonRotatingState("the |ndot| term of the Lagrangian is not differentiable at rest")
    L = 0.5 * m * (v @ v) + 0.5 * a2 * m * ell ** 2 * omega ** 2 \
        - a1 * m * ell * c * omega * (1.0 + (n @ v) / c)
    if _active(fld):
        A, phi = potentials(fld, state.x, state.t)
        L += params.charge * ((A @ v) / c - phi)
    return float(L)


def chart_lagrangian(params: RotatorParams, fld: Optional[FieldConfig] = None, frame=None):
    """Return L(q, qdot, t) in the spherical chart attached to ``frame``.

    This is the function handed to :mod:`rotators.numdiff`; it is written
    for speed (scalar math) and knows nothing about the closed forms below.
    """
    m, ell, c, a1, a2, e = params.m, params.ell, params.c, params.a1, params.a2, params.charge
    F = np.eye(3) if frame is None else np.asarray(frame, dtype=float)
    f00, f01, f02 = F[0]
    f10, f11, f12 = F[1]
    f20, f21, f22 = F[2]
    charged = _active(fld) and e != 0

    def L(q, qdot, t):
        vx, vy, vz, th_d, ph_d = qdot
        st, ct = math.sin(q[3]), math.cos(q[3])
        sp, cp = math.sin(q[4]), math.cos(q[4])
        u0, u1, u2 = st * cp, st * sp, ct
        nx = f00 * u0 + f01 * u1 + f02 * u2
        ny = f10 * u0 + f11 * u1 + f12 * u2
        nz = f20 * u0 + f21 * u1 + f22 * u2
        omega = math.sqrt(th_d * th_d + st * st * ph_d * ph_d)
        nv = nx * vx + ny * vy + nz * vz
        value = 0.5 * m * (vx * vx + vy * vy + vz * vz) + 0.5 * a2 * m * ell * ell * omega * omega \
            - a1 * m * ell * omega * (c + nv)
        if charged:
            A, phi = potentials(fld, q[:3], t)
            value += e * ((A[0] * vx + A[1] * vy + A[2] * vz) / c - phi)
        return value

    return L


@dataclass(frozen=True)
class Momenta:
    """Linear momentum ``p`` and sphere momentum ``pi`` (pi.n = 0)."""

    p: np.ndarray
    pi: np.ndarray


def canonical_momenta(params: RotatorParams, state: RotatorState,
                      fld: Optional[FieldConfig] = None) -> Momenta:
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    v, n, ndot = state.v, state.n, state.ndot
    omega = _omega(ndot, "canonical momenta")
    p = m * v - a1 * m * ell * omega * n
    if _active(fld):
        A, _ = potentials(fld, state.x, state.t)
        p = p + params.charge * A / c
    pi = m * ell * c * (a2 * ell * omega / c - a1 * (1.0 + (n @ v) / c)) * ndot / omega
    return Momenta(p, pi)


def chart_momenta(params, chart: ChartState, fld=None) -> np.ndarray:
    """Momenta conjugate to (x, y, z, theta, phi)."""
    mom = canonical_momenta(params, from_chart(chart), fld)
    e_theta, e_phi = chart.tangent_basis
    return np.array([*mom.p, mom.pi @ e_theta, mom.pi @ e_phi])


def energy_function(params: RotatorParams, state: RotatorState,
                    fld: Optional[FieldConfig] = None) -> float:
    """Energy function G = qdot . dL/dqdot - L."""
    m, ell, a1 = params.m, params.ell, params.a1
    omega = float(np.linalg.norm(state.ndot))
    kin = m * state.v - a1 * m * ell * omega * state.n
    G = (kin @ kin) / (2 * m) + 0.5 * m * ell ** 2 * params.gap * omega ** 2
    if _active(fld):
        _, phi = potentials(fld, state.x, state.t)
        G += params.charge * phi
    return float(G)


# ---------------------------------------------------------------------------
# Hessian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HessianProbe:
    """Velocity variation (delta v, delta ndot) with delta ndot tangent to the sphere."""

    d_v: np.ndarray
    d_ndot: np.ndarray

    def check(self, n, tol=1e-12):
        if abs(float(np.asarray(n) @ self.d_ndot)) > tol * max(1.0, np.linalg.norm(self.d_ndot)):
            raise ValueError("d_ndot must be tangent to the sphere")
        return self


def hessian_form_value(params: RotatorParams, state: RotatorState, probe: HessianProbe) -> float:
    """Half the second variation of L along (delta v, delta ndot)."""
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    n, v, ndot = state.n, state.v, state.ndot
    probe.check(n)
    omega = _omega(ndot, "Hessian form")
    dv, dn = np.asarray(probe.d_v, float), np.asarray(probe.d_ndot, float)
    along = (ndot @ dn) / omega
    w = dv - a1 * ell * along * n
    cross = np.cross(ndot, dn) / omega
    # -a1 (1 + n.v/c - (l/c)(a2/a1)|ndot|) written without dividing by a1
    bracket = a2 * ell * omega / c - a1 * (1.0 + (n @ v) / c)
    return float(0.5 * m * (w @ w)
                 + 0.5 * m * ell ** 2 * params.gap * along ** 2
                 + 0.5 * m * ell * c * bracket / omega * (cross @ cross))


def nullifying_variation(params, state: RotatorState, eps=1.0) -> HessianProbe:
    """delta v = eps a1 l |ndot| n, delta ndot = eps ndot."""
    omega = _omega(state.ndot, "nullifying variation")
    return HessianProbe(eps * params.a1 * params.ell * omega * state.n, eps * state.ndot)


def hessian_matrix_closed(params: RotatorParams, chart: ChartState) -> np.ndarray:
    """5x5 velocity Hessian from the ambient second derivatives.

    Built as J^T H_ambient J with J = diag(I, [d n/d theta, d n/d phi]);
    independent of the finite-difference construction.
    """
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    n, ndot, v = chart.n, chart.ndot, chart.v
    omega = _omega(ndot, "Hessian")
    s_hat = ndot / omega
    e_theta, e_phi = chart.tangent_basis
    J = np.column_stack([e_theta, e_phi])
    h_vn = -a1 * m * ell * np.outer(n, s_hat)
    h_nn = a2 * m * ell ** 2 * np.eye(3) \
        - a1 * m * ell * (c + n @ v) / omega * (np.eye(3) - np.outer(s_hat, s_hat))
    H = np.empty((5, 5))
    H[:3, :3] = m * np.eye(3)
    H[:3, 3:] = h_vn @ J
    H[3:, :3] = H[:3, 3:].T
    H[3:, 3:] = J.T @ h_nn @ J
    return H


def hessian_determinant_closed(params: RotatorParams, chart: ChartState) -> float:
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    n, v = chart.n, chart.v
    omega = _omega(chart.ndot, "Hessian determinant")
    sin2 = math.sin(chart.theta) ** 2
    return float(m ** 4 * ell ** 2 * params.gap
                 * (m * ell ** 2 / (ell * omega / c))
                 * (a2 * ell * omega / c - a1 * (1.0 + (n @ v) / c))
                 * sin2)


def oracle_settings(omega, step=3e-3) -> numdiff.DiffSettings:
    """Fourth-order stencil with a step proportional to |ndot|.

    L is not smooth at ndot = 0, so the usable step shrinks with the
    distance |ndot| to that set.
    """
    return numdiff.DiffSettings(step=max(1e-9, min(1e-2, step * min(1.0, omega))),
                                order=numdiff.DiffOrder.CENTRAL4)


ORACLE_STEP = 3e-3


def oracle_scales(chart: ChartState):
    """Per-coordinate step scales for the chart Lagrangian.

    Velocities of n only matter relative to |ndot| (L has a kink at
    ndot = 0), phi_dot enters through sin(theta) phi_dot, and near the
    chart pole functions of theta vary on the scale sin(theta).
    """
    omega = min(1.0, _omega(chart.ndot, "finite-difference oracle"))
    sn = abs(math.sin(chart.theta))
    return np.array([1.0, 1.0, 1.0, sn, 1.0]), np.array([1.0, 1.0, 1.0, omega, omega / sn])


def _oracle_cfg():
    return numdiff.DiffSettings(ORACLE_STEP, numdiff.DiffOrder.CENTRAL4)


def oracle_blocks(params: RotatorParams, chart: ChartState, fld: Optional[FieldConfig] = None):
    """Finite-difference Euler-Lagrange blocks (A, B, c_t, g) with scaled steps."""
    sq, sv = oracle_scales(chart)
    L = chart_lagrangian(params, fld, chart.frame)
    return numdiff.el_blocks(L, (chart.q, chart.qdot, chart.t), _oracle_cfg(), sq, sv)


def hessian_numeric(params, chart: ChartState, cfg=None, fld=None) -> np.ndarray:
    """Velocity Hessian of the chart Lagrangian by finite differences.

    Without ``cfg`` the oracle step scaling of :func:`oracle_scales` is used.
    """
    L = chart_lagrangian(params, fld, chart.frame)
    point = (chart.q, chart.qdot, chart.t)
    if cfg is None:
        return numdiff.hessian_velocity(L, point, _oracle_cfg(), v_scale=oracle_scales(chart)[1])
    return numdiff.hessian_velocity(L, point, cfg)


def scaled_determinant(H) -> float:
    """det(H) divided by the product of its column norms (Hadamard ratio)."""
    norms = np.linalg.norm(H, axis=0)
    return float(np.linalg.det(H) / np.prod(norms))


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal kernel vectors of the velocity Hessian in chart order."""

    vectors: list = field(default_factory=list)
    rank: int = 5
    singular_values: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return len(self.vectors)


def kernel_of(H, orient=None, rtol=KERNEL_RTOL) -> KernelBasis:
    """Kernel of a symmetric matrix from singular values below ``rtol`` x largest."""
    _, s, vt = np.linalg.svd(H)
    small = s < rtol * s[0]
    vectors = []
    for row in vt[small]:
        w = row / np.linalg.norm(row)
        if orient is not None and w @ orient < 0:
            w = -w
        vectors.append(w)
    return KernelBasis(vectors, int(np.count_nonzero(~small)), s)


def nullifying_kernel(params: RotatorParams, chart: ChartState, cfg=None, H=None) -> KernelBasis:
    """Numerical kernel of the finite-difference velocity Hessian.

    Kernel vectors are oriented so that their angular part points along
    (theta_dot, phi_dot), i.e. towards spinning the rotator up.
    """
    _omega(chart.ndot, "nullifying kernel")
    if H is None:
        H = hessian_numeric(params, chart, cfg)
    orient = np.array([0.0, 0.0, 0.0, chart.theta_dot, chart.phi_dot])
    return kernel_of(H, orient)


def nullifying_direction(params, chart: ChartState, order="chart") -> np.ndarray:
    """Closed-form nullifying vector, unnormalised.

    ``order="chart"`` places theta_dot then phi_dot in the angular slots,
    matching the velocity ordering of the Hessian; ``order="printed"``
    swaps them (the ordering printed alongside the determinant).
    """
    omega = _omega(chart.ndot, "nullifying direction")
    head = params.a1 * params.ell * omega * chart.n
    tail = [chart.theta_dot, chart.phi_dot]
    if order == "printed":
        tail = tail[::-1]
    elif order != "chart":
        raise ValueError(f"unknown order {order!r}")
    return np.concatenate([head, tail])


# ---------------------------------------------------------------------------
# Lagrange multiplier of |n| = 1
# ---------------------------------------------------------------------------


def _k_factor(params, n, v, omega):
    # pi = k * ndot/|ndot|
    return params.m * params.ell * (params.a2 * params.ell * omega - params.a1 * (params.c + n @ v))


def lambda_multiplier(params: RotatorParams, state: RotatorState, ndotdot) -> float:
    """Multiplier of the sphere constraint, Lambda = (n.dL/dn - n.d(pi)/dt)/2."""
    n, v = state.n, state.v
    omega = _omega(state.ndot, "Lambda")
    k = _k_factor(params, n, v, omega)
    dL_dn = -params.a1 * params.m * params.ell * omega * v
    # n.d(pi)/dt = k n.nddot/|ndot| because n.(ndot/|ndot|) = 0
    n_pidot = k * (n @ np.asarray(ndotdot, float)) / omega
    return float(0.5 * (n @ dL_dn - n_pidot))


def unprojected_residuals(params, state: RotatorState, vdot, ndotdot, lam,
                          fld: Optional[FieldConfig] = None):
    """Residuals of the unconstrained Euler-Lagrange equations with multiplier ``lam``.

    Returns (linear, sphere): d/dt dL/dv - dL/dx and
    d(pi)/dt - dL/dn + 2 lam n, both 3-vectors.
    """
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    n, v, ndot = state.n, state.v, state.ndot
    vdot = np.asarray(vdot, float)
    nddot = np.asarray(ndotdot, float)
    omega = _omega(ndot, "residual")
    omega_dot = (ndot @ nddot) / omega
    s_hat = ndot / omega
    s_hat_dot = nddot / omega - ndot * omega_dot / omega ** 2
    k = _k_factor(params, n, v, omega)
    k_dot = m * ell * (a2 * ell * omega_dot - a1 * (ndot @ v + n @ vdot))
    pi_dot = k_dot * s_hat + k * s_hat_dot
    sphere = pi_dot + a1 * m * ell * omega * v + 2.0 * lam * n
    linear = m * vdot - a1 * m * ell * (omega_dot * n + omega * ndot) \
        - lorentz_force(params, state, fld)
    return linear, sphere


# ---------------------------------------------------------------------------
# Legendre map and Hamiltonian
# ---------------------------------------------------------------------------


def _legendre_bracket(params, n, p, pi):
    """1 + p.n/(mc) - |pi|/(|a1| m l c), checked against the sign condition."""
    if is_degenerate(params):
        raise DegenerateLegendreMap("velocities cannot be recovered from momenta when a2 = a1**2")
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    pi_norm = float(np.linalg.norm(pi))
    if pi_norm == 0.0:
        raise NonRotatingState("the Legendre inversion requires |pi| > 0")
    if abs(float(n @ pi)) > 1e-10 * max(1.0, pi_norm):
        raise ValueError("pi must be tangent to the sphere (pi.n = 0)")
    bracket = 1.0 + (p @ n) / (m * c) - pi_norm / (abs(a1) * m * ell * c)
    if not bracket * (a1 / params.gap) > 0:
        raise SignConditionViolated(
            f"bracket {bracket:.6g} must have the sign of a1/(a2 - a1**2) = {a1 / params.gap:.6g}")
    return bracket, pi_norm


def velocities_from_momenta(params: RotatorParams, n, p, pi):
    """Invert the momenta: return (v, ndot) given direction n and momenta (p, pi)."""
    n = np.asarray(n, float)
    p = np.asarray(p, float)
    pi = np.asarray(pi, float)
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    if a1 == 0:
        if abs(float(n @ pi)) > 1e-10 * max(1.0, np.linalg.norm(pi)):
            raise ValueError("pi must be tangent to the sphere (pi.n = 0)")
        return p / m, pi / (params.a2 * m * ell ** 2)
    bracket, pi_norm = _legendre_bracket(params, n, p, pi)
    gap = params.gap
    v = c * (p / (m * c) + (a1 ** 2 / gap) * bracket * n)
    ndot = -(c / ell) * (abs(a1) / gap) * bracket * pi / pi_norm
    return v, ndot


def hamiltonian(params: RotatorParams, n, p, pi) -> float:
    n = np.asarray(n, float)
    p = np.asarray(p, float)
    pi = np.asarray(pi, float)
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    if a1 == 0:
        if is_degenerate(params):
            raise DegenerateLegendreMap("Hamiltonian undefined when a2 = a1**2")
        return float(p @ p / (2 * m) + pi @ pi / (2 * params.a2 * m * ell ** 2))
    bracket, _ = _legendre_bracket(params, n, p, pi)
    return float(p @ p / (2 * m) + 0.5 * m * c ** 2 * (a1 ** 2 / params.gap) * bracket ** 2)


def false_hamiltonian(params: RotatorParams, p) -> float:
    """p^2/2m: what the degenerate energy function looks like written in p alone.

    Its flow moves the centre of mass uniformly and freezes n, which is not
    a motion of the degenerate rotator when it spins.
    """
    p = np.asarray(p, float)
    return float(p @ p / (2 * params.m))


# ---------------------------------------------------------------------------
# fields, constraints, frequency law
# ---------------------------------------------------------------------------


def lorentz_force(params: RotatorParams, state: RotatorState, fld: Optional[FieldConfig]):
    if not _active(fld) or params.charge == 0:
        return np.zeros(3)
    E, H, _, _ = field_eval(fld, state.x, state.t)
    return params.charge * (E + np.cross(state.v, H) / fld.c)


def lorentz_constraint_residual(state: RotatorState, fld: Optional[FieldConfig]) -> float:
    """n . (v/c x H + E), which must vanish along charged degenerate motion."""
    if not _active(fld):
        return 0.0
    E, H, _, _ = field_eval(fld, state.x, state.t)
    return float(state.n @ (np.cross(state.v, H) / fld.c + E))


def omega_dot_law(params: RotatorParams, state: RotatorState, fld: Optional[FieldConfig]) -> float:
    """d|ndot|/dt = a1/(a2 - a1^2) e/(m l) n.(v/c x H + E)."""
    if is_degenerate(params):
        raise DegenerateSystem("the frequency is not determined when a2 = a1**2")
    if params.charge == 0 or not _active(fld):
        return 0.0
    return float(params.a1 / params.gap * params.charge / (params.m * params.ell)
                 * lorentz_constraint_residual(state, fld))


def constraint_residual_general(params: RotatorParams, chart: ChartState,
                                fld: Optional[FieldConfig] = None, cfg=None) -> float:
    """Contract the non-acceleration side of the Euler-Lagrange equations with the kernel.

    Computes (B qdot + c_t - g) . eta with eta the unit kernel vector of the
    finite-difference velocity Hessian.  For the free degenerate rotator this
    vanishes at every state; with minimal coupling it equals
    -e a1 l |ndot| n.(v/c x H + E) / |eta_closed| (eta oriented as in
    :func:`nullifying_kernel`).
    """
    if not is_degenerate(params):
        raise NonDegenerateSystem("the velocity Hessian has an empty kernel when a2 != a1**2")
    _omega(chart.ndot, "constraint residual")
    if cfg is None:
        A, B, c_t, g = oracle_blocks(params, chart, fld)
    else:
        L = chart_lagrangian(params, fld, chart.frame)
        A, B, c_t, g = numdiff.el_blocks(L, (chart.q, chart.qdot, chart.t), cfg)
    basis = nullifying_kernel(params, chart, H=A)
    if basis.dim == 0:
        raise NonDegenerateSystem("numerical kernel is empty")
    eta = basis.vectors[0]
    return float((B @ chart.qdot + c_t - g) @ eta)
