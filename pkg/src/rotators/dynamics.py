"""Equations of motion, fixed-step integration and solution checking.

Non-degenerate rotators are integrated from closed-form accelerations,

    F      = e (E + v x H / c)
    dOmega = a1 n.F / (m l (a2 - a1^2))
    nddot  = -Omega^2 n + dOmega s + beta b,   beta = -a1 m l Omega^2 (b.v) / k
    vdot   = F/m + a1 l (dOmega n + Omega ndot)

with s = ndot/Omega, b = n x s and k = m l (a2 l Omega - a1 (c + n.v)).
The finite-difference solve of the chart Euler-Lagrange equations
(:func:`accelerations`) is kept as an independent oracle.

Degenerate rotators (a2 = a1^2) do not determine Omega(t).  A gauge
function Omega(t) is supplied and the path is integrated in arc length:
with P = m v - a1 m l Omega n,

    dP/dt = F,   dx/dt = P/m + a1 l Omega n,
    dn/dt = Omega n',   dn'/dt = Omega n'',   ds/dt = Omega,
    n'' = -n + (b.P) b / (m c + n.P).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import mechanics, numdiff
from .errors import (ConstraintViolated, ConstraintViolatedAtStart, GaugeMismatch,
                     IndeterminateDynamics, NonRotatingState, UnsupportedDegenerateField,
                     ZeroDenominator)
from .model import (ChartState, FieldConfig, FieldKind, RotatorParams, RotatorState,
                    chart_frame_for, field_eval_many, is_degenerate, sphere_basis, to_chart)

START_CONSTRAINT_TOL = 1e-9
RUN_CONSTRAINT_TOL = 1e-7
GAUGE_MATCH_RTOL = 1e-9


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------


class GaugeKind(str, enum.Enum):
    CONSTANT = "constant"
    SINUSOIDAL = "sinusoidal"
    TABLE = "table"


@dataclass(frozen=True)
class GaugeFrequency:
    """Prescribed |ndot|(t) for degenerate motion.

    constant:    Omega0
    sinusoidal:  Omega0 (1 + amp sin(freq t)), amp < 1
    table:       cubic spline through ``samples`` [(t, Omega), ...]
    """

    kind: GaugeKind = GaugeKind.CONSTANT
    omega0: float = 1.0
    amp: float = 0.0
    freq: float = 0.0
    samples: tuple = ()
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", GaugeKind(self.kind))
        if self.kind is GaugeKind.TABLE:
            pts = np.asarray(self.samples, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError("table gauge needs at least two (t, omega) samples")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError("table gauge times must be strictly increasing")
            if np.any(pts[:, 1] <= 0):
                raise ValueError("table gauge values must be positive")
            object.__setattr__(self, "samples", tuple(map(tuple, pts.tolist())))
            object.__setattr__(self, "_spline", CubicSpline(pts[:, 0], pts[:, 1]))
            return
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.kind is GaugeKind.SINUSOIDAL and not (0 <= self.amp < 1):
            raise ValueError("sinusoidal gauge needs 0 <= amp < 1 to keep omega positive")

    @classmethod
    def constant(cls, omega0):
        return cls(GaugeKind.CONSTANT, omega0=float(omega0))

    @classmethod
    def sinusoidal(cls, omega0, amp, freq):
        return cls(GaugeKind.SINUSOIDAL, omega0=float(omega0), amp=float(amp), freq=float(freq))

    @classmethod
    def table(cls, samples):
        return cls(GaugeKind.TABLE, samples=tuple(samples))

    def __call__(self, t) -> float:
        if self.kind is GaugeKind.CONSTANT:
            return self.omega0
        if self.kind is GaugeKind.SINUSOIDAL:
            return self.omega0 * (1.0 + self.amp * math.sin(self.freq * t))
        return float(self._spline(t))

    def rate(self, t) -> float:
        """dOmega/dt."""
        if self.kind is GaugeKind.CONSTANT:
            return 0.0
        if self.kind is GaugeKind.SINUSOIDAL:
            return self.omega0 * self.amp * self.freq * math.cos(self.freq * t)
        return float(self._spline(t, 1))

    def check_window(self, t0, t1):
        """Raise ValueError unless Omega > 0 on [t0, t1]."""
        if self.kind is not GaugeKind.TABLE:
            return
        lo, hi = self.samples[0][0], self.samples[-1][0]
        if t0 < lo or t1 > hi:
            raise ValueError(f"table gauge covers [{lo}, {hi}], integration needs [{t0}, {t1}]")
        grid = np.linspace(t0, t1, 2001)
        if np.min(self._spline(grid)) <= 0:
            raise ValueError("table gauge spline is not positive on the integration window")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.  ``t_end`` is an absolute time."""

    dt: float = 1e-3
    t_end: float = 1.0
    method: str = "rk4"
    renorm_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "method", str(self.method).lower())
        if self.method != "rk4":
            raise ValueError(f"unknown method {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.dt < self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if int(self.renorm_every) != self.renorm_every or self.renorm_every < 1:
            raise ValueError("renorm_every must be a positive integer")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def _readonly(a):
    if a is None:
        return None
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def diagnostics(params: RotatorParams, fld: Optional[FieldConfig], t, x, v, n, omega):
    """Energy, canonical p, Hessian determinant and Lorentz residual per sample."""
    m, ell, c, a1, a2, e = params.m, params.ell, params.c, params.a1, params.a2, params.charge
    fld = fld if fld is not None else FieldConfig.none()
    E, H, A, phi = field_eval_many(fld, x, t)
    kin = m * v - a1 * m * ell * omega[:, None] * n
    energy = np.einsum("ij,ij->i", kin, kin) / (2 * m) \
        + 0.5 * m * ell ** 2 * params.gap * omega ** 2 + e * phi
    p = kin + e * A / c
    nv = np.einsum("ij,ij->i", n, v)
    # sin^2 theta in the chart that to_chart would pick
    sin2 = n[:, 0] ** 2 + n[:, 1] ** 2
    sin2 = np.where(np.sqrt(sin2) >= 0.1, sin2, n[:, 1] ** 2 + n[:, 2] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        det = m ** 4 * ell ** 2 * params.gap * (m * ell * c / omega) \
            * (a2 * ell * omega / c - a1 * (1.0 + nv / c)) * sin2
    det = np.where(params.gap == 0, 0.0, det)
    lorentz = np.einsum("ij,ij->i", n, np.cross(v, H) / fld.c + E)
    return energy, p, det, lorentz


@dataclass(frozen=True)
class Trajectory:
    """Sampled motion plus per-sample diagnostics, stored column-wise.

    ``ndot`` may be None for trajectories read back from CSV (which stores
    |ndot| only).  ``s`` is the arc length of n.
    """

    params: RotatorParams
    fld: FieldConfig
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    n: np.ndarray
    ndot: Optional[np.ndarray]
    omega: np.ndarray
    energy: np.ndarray
    p: np.ndarray
    det_hessian: np.ndarray
    lorentz_residual: np.ndarray
    s: Optional[np.ndarray] = None
    gauge: Optional[GaugeFrequency] = None

    def __post_init__(self):
        for name in ("t", "x", "v", "n", "ndot", "omega", "energy", "p", "det_hessian",
                     "lorentz_residual", "s"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if len(self.t) < 1:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    @classmethod
    def from_states(cls, params, fld, t, x, v, n, ndot, s=None, gauge=None):
        fld = fld if fld is not None else FieldConfig.none()
        t = np.asarray(t, float)
        x, v, n, ndot = (np.asarray(a, float) for a in (x, v, n, ndot))
        omega = np.linalg.norm(ndot, axis=1)
        if s is None:
            s = cumulative_trapezoid(omega, t, initial=0.0)
        energy, p, det, lor = diagnostics(params, fld, t, x, v, n, omega)
        return cls(params, fld, t, x, v, n, ndot, omega, energy, p, det, lor, s, gauge)

    def __len__(self):
        return len(self.t)

    def state(self, i) -> RotatorState:
        if self.ndot is None:
            raise ValueError("trajectory does not store ndot")
        return RotatorState(self.t[i], self.x[i], self.v[i], self.n[i], self.ndot[i])

    @property
    def final_state(self) -> RotatorState:
        return self.state(-1)

    def record(self, i) -> dict:
        return {"energy": float(self.energy[i]), "p": self.p[i].copy(),
                "det_hessian": float(self.det_hessian[i]),
                "lorentz_residual": float(self.lorentz_residual[i]),
                "omega": float(self.omega[i])}

    def samples(self):
        """Iterate over (state, diagnostics record) pairs."""
        for i in range(len(self)):
            yield self.state(i), self.record(i)


# ---------------------------------------------------------------------------
# accelerations
# ---------------------------------------------------------------------------


def _force_fn(params: RotatorParams, fld: Optional[FieldConfig]):
    """Scalar Lorentz force F(x, v, t) -> (Fx, Fy, Fz)."""
    e = params.charge
    if fld is None or fld.is_none or e == 0:
        return lambda x0, x1, x2, v0, v1, v2, t: (0.0, 0.0, 0.0)
    c = fld.c
    if fld.kind is FieldKind.UNIFORM_E:
        F = tuple(float(u) for u in e * fld.E0)
        return lambda x0, x1, x2, v0, v1, v2, t: F
    if fld.kind is FieldKind.UNIFORM_H:
        h0, h1, h2 = (float(u) * e / c for u in fld.H0)
        return lambda x0, x1, x2, v0, v1, v2, t: (v1 * h2 - v2 * h1, v2 * h0 - v0 * h2,
                                                  v0 * h1 - v1 * h0)
    k0, k1, k2 = (float(u) for u in fld.wave_k)
    w, ph = fld.wave_omega, fld.wave_phase
    e0, e1, e2 = (float(u) * e for u in fld.E0)
    h0, h1, h2 = (float(u) * e / w for u in np.cross(fld.wave_k, fld.E0))  # (c/w)/c

    def F(x0, x1, x2, v0, v1, v2, t):
        cs = math.cos(k0 * x0 + k1 * x1 + k2 * x2 - w * t + ph)
        return (cs * (e0 + v1 * h2 - v2 * h1), cs * (e1 + v2 * h0 - v0 * h2),
                cs * (e2 + v0 * h1 - v1 * h0))

    return F


def _vector_rhs(params: RotatorParams, fld: Optional[FieldConfig]):
    """Right-hand side for y = (x, v, n, ndot), non-degenerate case."""
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    gap = params.gap
    force = _force_fn(params, fld)

    def rhs(t, y):
        x0, x1, x2, v0, v1, v2, n0, n1, n2, d0, d1, d2 = y.tolist()
        om = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if om == 0.0:
            raise NonRotatingState(f"|ndot| vanished at t = {t}")
        s0, s1, s2 = d0 / om, d1 / om, d2 / om
        b0, b1, b2 = n1 * s2 - n2 * s1, n2 * s0 - n0 * s2, n0 * s1 - n1 * s0
        F0, F1, F2 = force(x0, x1, x2, v0, v1, v2, t)
        alpha = a1 * (n0 * F0 + n1 * F1 + n2 * F2) / (m * ell * gap)
        k = m * ell * (a2 * ell * om - a1 * (c + n0 * v0 + n1 * v1 + n2 * v2))
        if k == 0.0:
            raise ZeroDenominator(f"sphere-momentum factor vanished at t = {t}")
        beta = -a1 * m * ell * om * om * (b0 * v0 + b1 * v1 + b2 * v2) / k
        w2 = om * om
        a0 = -w2 * n0 + alpha * s0 + beta * b0
        a1_ = -w2 * n1 + alpha * s1 + beta * b1
        a2_ = -w2 * n2 + alpha * s2 + beta * b2
        g = a1 * ell
        return np.array([v0, v1, v2,
                         F0 / m + g * (alpha * n0 + om * d0),
                         F1 / m + g * (alpha * n1 + om * d1),
                         F2 / m + g * (alpha * n2 + om * d2),
                         d0, d1, d2, a0, a1_, a2_])

    return rhs


def closed_form_accelerations(params: RotatorParams, state: RotatorState,
                              fld: Optional[FieldConfig] = None):
    """(vdot, nddot) of a non-degenerate rotator."""
    if is_degenerate(params):
        raise IndeterminateDynamics("accelerations are not unique when a2 = a1**2")
    y = np.concatenate([state.x, state.v, state.n, state.ndot])
    out = _vector_rhs(params, fld)(state.t, y)
    return out[3:6], out[9:12]


def chart_accelerations(chart: ChartState, vdot, nddot) -> np.ndarray:
    """Convert ambient (vdot, nddot) to chart accelerations (xddot, theta_ddot, phi_ddot)."""
    th, ph, thd, phd = chart.theta, chart.phi, chart.theta_dot, chart.phi_dot
    u, u_t, u_p = sphere_basis(th, ph)
    st, ct, sp, cp = math.sin(th), math.cos(th), math.sin(ph), math.cos(ph)
    u_tp = np.array([-ct * sp, ct * cp, 0.0])
    u_pp = np.array([-st * cp, -st * sp, 0.0])
    local = chart.frame.T @ np.asarray(nddot, float)
    r = local - (-u * thd ** 2 + 2 * u_tp * thd * phd + u_pp * phd ** 2)
    return np.array([*np.asarray(vdot, float), r @ u_t, (r @ u_p) / st ** 2])


def accelerations(params: RotatorParams, chart: ChartState,
                  fld: Optional[FieldConfig] = None, cfg=None) -> np.ndarray:
    """Chart accelerations from the finite-difference Euler-Lagrange blocks.

    Solves A qddot = -B qdot - c_t + g.  This never uses the closed forms and
    serves as their oracle.
    """
    if is_degenerate(params):
        raise IndeterminateDynamics(
            "the velocity Hessian is singular: infinitely many accelerations are admissible")
    omega = float(np.linalg.norm(chart.ndot))
    if omega == 0.0:
        raise NonRotatingState("accelerations require |ndot| > 0")
    if cfg is None:
        A, B, c_t, g = mechanics.oracle_blocks(params, chart, fld)
    else:
        L = mechanics.chart_lagrangian(params, fld, chart.frame)
        A, B, c_t, g = numdiff.el_blocks(L, (chart.q, chart.qdot, chart.t), cfg)
    rhs = -B @ chart.qdot - c_t + g
    qddot = np.linalg.solve(A, rhs)
    res = np.linalg.norm(A @ qddot - rhs)
    if res > 1e-10 * max(1.0, np.linalg.norm(rhs)):
        raise IndeterminateDynamics(f"ill-conditioned velocity Hessian (solve residual {res:.3g})")
    return qddot


def projected_sphere_rhs(params: RotatorParams, state: RotatorState, p0,
                         omega_prime: float = 0.0) -> np.ndarray:
    """n'' (derivatives in arc length) for free motion with linear momentum p0.

    ``omega_prime`` is dOmega/ds; it only matters when a2 != a1^2.
    """
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    gap = params.gap
    n = state.n
    omega = float(np.linalg.norm(state.ndot))
    if omega == 0.0:
        raise NonRotatingState("the arc-length equation requires |ndot| > 0")
    n1 = state.ndot / omega
    p0 = np.asarray(p0, float)
    b = np.cross(n, n1)
    den = a1 * (m * c + p0 @ n) - gap * m * ell * omega
    if den == 0.0 or abs(den) < 1e-14 * (abs(a1) * m * c + abs(gap) * m * ell * omega):
        raise ZeroDenominator("a1 (m c + p0.n) - (a2 - a1^2) m l Omega vanishes")
    return -n + (a1 * (p0 @ b) * b + gap * m * ell * omega_prime * n1) / den


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def _rk4(rhs, t0, y0, dt, nsteps, post=None):
    ys = np.empty((nsteps + 1, y0.size))
    ts = t0 + dt * np.arange(nsteps + 1)
    ys[0] = y = y0.copy()
    h2 = 0.5 * dt
    for i in range(nsteps):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + h2, y + h2 * k1)
        k3 = rhs(t + h2, y + h2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if post is not None:
            y = post(i + 1, ts[i + 1], y)
        ys[i + 1] = y
    return ts, ys


def _steps(initial_t, cfg: IntegratorConfig):
    span = cfg.t_end - initial_t
    if not span > 0:
        raise ValueError(f"t_end = {cfg.t_end} must exceed the initial time {initial_t}")
    nsteps = max(1, int(round(span / cfg.dt)))
    return nsteps, span / nsteps


def integrate(params: RotatorParams, initial: RotatorState, fld: Optional[FieldConfig] = None,
              cfg: IntegratorConfig = IntegratorConfig(),
              gauge: Optional[GaugeFrequency] = None) -> Trajectory:
    """Fixed-step RK4 integration from ``initial`` up to ``cfg.t_end``.

    The step is adjusted to divide the interval exactly.  Degenerate
    rotators need a ``gauge``; non-degenerate ones must not get one.
    """
    fld = fld if fld is not None else FieldConfig.none()
    omega0 = float(np.linalg.norm(initial.ndot))
    if omega0 == 0.0:
        raise NonRotatingState("the initial state does not rotate (|ndot| = 0)")
    nsteps, dt = _steps(initial.t, cfg)
    if is_degenerate(params):
        return _integrate_degenerate(params, initial, fld, nsteps, dt, cfg.renorm_every, gauge)
    if gauge is not None:
        raise ValueError("a gauge frequency only applies to degenerate rotators")

    every = int(cfg.renorm_every)

    def renorm(i, t, y):
        if i % every:
            return y
        n = y[6:9] / np.linalg.norm(y[6:9])
        y[6:9] = n
        y[9:12] -= (n @ y[9:12]) * n
        return y

    y0 = np.concatenate([initial.x, initial.v, initial.n, initial.ndot])
    ts, ys = _rk4(_vector_rhs(params, fld), initial.t, y0, dt, nsteps, renorm)
    return Trajectory.from_states(params, fld, ts, ys[:, 0:3], ys[:, 3:6], ys[:, 6:9], ys[:, 9:12])


def _degenerate_rhs(params, fld, gauge, planar):
    m, ell, c, a1 = params.m, params.ell, params.c, params.a1
    mc = m * c
    force = _force_fn(params, fld)

    def rhs(t, y):
        x0, x1, x2, P0, P1, P2, n0, n1, n2, q0, q1, q2, _ = y.tolist()
        om = gauge(t)
        g = a1 * ell * om
        v0, v1, v2 = P0 / m + g * n0, P1 / m + g * n1, P2 / m + g * n2
        F0, F1, F2 = force(x0, x1, x2, v0, v1, v2, t)
        if planar:
            r0, r1, r2 = -n0, -n1, -n2
        else:
            b0, b1, b2 = n1 * q2 - n2 * q1, n2 * q0 - n0 * q2, n0 * q1 - n1 * q0
            den = mc + n0 * P0 + n1 * P1 + n2 * P2
            if den == 0.0:
                raise ZeroDenominator(f"m c + n.P vanished at t = {t}")
            w = (b0 * P0 + b1 * P1 + b2 * P2) / den
            r0, r1, r2 = -n0 + w * b0, -n1 + w * b1, -n2 + w * b2
        return np.array([v0, v1, v2, F0, F1, F2, om * q0, om * q1, om * q2,
                         om * r0, om * r1, om * r2, om])

    return rhs


def _integrate_degenerate(params, initial, fld, nsteps, dt, every, gauge):
    m, ell, a1 = params.m, params.ell, params.a1
    if gauge is None:
        raise IndeterminateDynamics(
            "a2 = a1**2: the frequency |ndot|(t) is arbitrary, supply a gauge")
    t0, t1 = initial.t, initial.t + nsteps * dt
    gauge.check_window(t0, t1)
    omega0 = float(np.linalg.norm(initial.ndot))
    g0 = gauge(t0)
    if abs(g0 - omega0) > GAUGE_MATCH_RTOL * omega0:
        raise GaugeMismatch(f"gauge gives Omega(t0) = {g0!r} but |ndot| = {omega0!r}")

    charged = params.charge != 0 and not fld.is_none
    planar = False
    if charged:
        if fld.kind is FieldKind.PLANE_WAVE:
            raise UnsupportedDegenerateField(
                "degenerate motion in a plane wave is not integrated; only the constraint can be evaluated")
        res = mechanics.lorentz_constraint_residual(initial, fld)
        if abs(res) >= START_CONSTRAINT_TOL:
            raise ConstraintViolatedAtStart(
                f"n.(v/c x H + E) = {res:.6e} at t = {t0}, must vanish for a2 = a1**2")
        if fld.kind is FieldKind.UNIFORM_E:
            # the constraint n.E = 0 is holonomic; its time derivative must vanish too
            rate = float(initial.ndot @ fld.E0)
            if abs(rate) >= START_CONSTRAINT_TOL * max(1.0, omega0 * np.linalg.norm(fld.E0)):
                raise ConstraintViolatedAtStart(
                    f"ndot.E = {rate:.6e} at t = {t0}; n must rotate in the plane orthogonal to E")
            planar = True

    P0 = m * initial.v - a1 * m * ell * omega0 * initial.n
    y0 = np.concatenate([initial.x, P0, initial.n, initial.ndot / omega0, [0.0]])
    monitor = charged and not planar
    H = fld.H0 / fld.c if monitor else None

    def post(i, t, y):
        if i % every == 0:
            n = y[6:9] / np.linalg.norm(y[6:9])
            q = y[9:12] - (n @ y[9:12]) * n
            y[6:9] = n
            y[9:12] = q / np.linalg.norm(q)
        if monitor:
            n = y[6:9]
            v = y[3:6] / m + a1 * ell * gauge(t) * n
            res = float(n @ np.cross(v, H))
            if abs(res) > RUN_CONSTRAINT_TOL:
                raise ConstraintViolated(f"n.(v/c x H) = {res:.3e} at t = {t:.6g}")
        return y

    ts, ys = _rk4(_degenerate_rhs(params, fld, gauge, planar), t0, y0, dt, nsteps, post)
    omega = np.array([gauge(t) for t in ts])
    n = ys[:, 6:9]
    v = ys[:, 3:6] / m + a1 * ell * omega[:, None] * n
    ndot = omega[:, None] * ys[:, 9:12]
    return Trajectory.from_states(params, fld, ts, ys[:, 0:3], v, n, ndot, s=ys[:, 12], gauge=gauge)


# ---------------------------------------------------------------------------
# checking solutions by substitution
# ---------------------------------------------------------------------------

_W1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_W2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class ResidualReport:
    """Euler-Lagrange residuals A qddot + B qdot + c_t - g at sample times."""

    times: np.ndarray
    residuals: np.ndarray
    labels: tuple

    @property
    def per_equation(self) -> np.ndarray:
        return np.max(np.abs(self.residuals), axis=0)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def as_dict(self) -> dict:
        return {"samples": int(len(self.times)), "max_residual": self.max_residual,
                "per_equation": dict(zip(self.labels, map(float, self.per_equation)))}


def _chart_coords(frame, x, n):
    """Chart coordinates (x, theta, phi) of the rows of (x, n); phi is unwrapped."""
    u = n @ frame
    theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    phi = np.unwrap(np.arctan2(u[:, 1], u[:, 0]))
    return np.column_stack([x, theta, phi])


def _residual_at(L, q_window, h, t, steps_of):
    q = q_window[2]
    qdot = _W1 @ q_window / h
    qddot = _W2 @ q_window / h ** 2
    cfg, sq, sv = steps_of(q, qdot)
    A, B, c_t, g = numdiff.el_blocks(L, (q, qdot, t), cfg, sq, sv)
    return A @ qddot + B @ qdot + c_t - g


def _chart_steps(q, qdot):
    sn = abs(math.sin(q[3]))
    omega = min(1.0, math.hypot(qdot[3], sn * qdot[4]))
    cfg = numdiff.DiffSettings(mechanics.ORACLE_STEP, numdiff.DiffOrder.CENTRAL4)
    return cfg, np.array([1.0, 1.0, 1.0, sn, 1.0]), np.array([1.0, 1.0, 1.0, omega, omega / sn])


def verify_solution(params: RotatorParams, source, fld: Optional[FieldConfig] = None, *,
                    times: Optional[Sequence[float]] = None, h: float = 5e-3,
                    max_points: int = 200, system: str = "full") -> ResidualReport:
    """Substitute a motion into the Euler-Lagrange equations.

    ``source`` is a :class:`Trajectory` (uniformly sampled; velocities and
    accelerations come from 5-point differences of positions) or a sampler
    with ``state(t)``, evaluated at ``times`` with stencil spacing ``h``.
    Only positions enter, so inconsistent stored velocities are caught.

    ``system="reduced"`` checks a sampler against its own reduced
    Lagrangian, exposed as ``source.reduced_system() -> (L, coords, labels)``.
    """
    fld = fld if fld is not None else FieldConfig.none()
    out_t, out_r = [], []
    if system == "reduced":
        if isinstance(source, Trajectory) or times is None:
            raise ValueError("reduced checks need a sampler and explicit times")
        L, coords, labels = source.reduced_system()

        def steps_of(q, qdot):
            return mechanics.oracle_settings(abs(qdot[-1])), None, None

        for t in np.asarray(times, float):
            win = np.array([coords(t + k * h) for k in range(-2, 3)])
            out_t.append(t)
            out_r.append(_residual_at(L, win, h, t, steps_of))
        return ResidualReport(np.array(out_t), np.array(out_r), tuple(labels))
    if system != "full":
        raise ValueError(f"unknown system {system!r}")

    labels = ("x", "y", "z", "theta", "phi")
    cache = {}

    def lagrangian(frame):
        key = frame.tobytes()
        if key not in cache:
            cache[key] = mechanics.chart_lagrangian(params, fld, frame)
        return cache[key]

    if isinstance(source, Trajectory):
        t_all = source.t
        if len(t_all) < 5:
            raise ValueError("need at least 5 samples")
        steps = np.diff(t_all)
        h = float(np.mean(steps))
        if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(t_all[-1])):
            raise ValueError("trajectory must be uniformly sampled")
        idx = np.arange(2, len(t_all) - 2)
        if len(idx) > max_points:
            idx = idx[np.linspace(0, len(idx) - 1, max_points).round().astype(int)]
        for i in idx:
            frame = chart_frame_for(source.n[i])
            win = _chart_coords(frame, source.x[i - 2:i + 3], source.n[i - 2:i + 3])
            out_t.append(t_all[i])
            out_r.append(_residual_at(lagrangian(frame), win, h, t_all[i], _chart_steps))
    else:
        if times is None:
            raise ValueError("a sampler needs explicit times")
        for t in np.asarray(times, float):
            states = [source.state(t + k * h) for k in range(-2, 3)]
            frame = chart_frame_for(states[2].n)
            win = _chart_coords(frame, np.array([s.x for s in states]), np.array([s.n for s in states]))
            out_t.append(t)
            out_r.append(_residual_at(lagrangian(frame), win, h, t, _chart_steps))
    return ResidualReport(np.array(out_t), np.array(out_r), labels)


# ---------------------------------------------------------------------------
# Hamiltonian flows and path comparison
# ---------------------------------------------------------------------------


def _scalar_hamiltonian(params: RotatorParams, frame):
    """H(z) with z = (x, theta, phi, p, p_theta, p_phi) in the chart of ``frame``."""
    m, ell, c, a1, a2 = params.m, params.ell, params.c, params.a1, params.a2
    F = np.asarray(frame, float)
    if a1 == 0:
        def H(z):
            st = math.sin(z[3])
            pi2 = z[8] ** 2 + (z[9] / st) ** 2
            return (z[5] ** 2 + z[6] ** 2 + z[7] ** 2) / (2 * m) + pi2 / (2 * a2 * m * ell ** 2)
        return H
    ratio = a1 ** 2 / params.gap
    f = F.tolist()

    def H(z):
        st, ct = math.sin(z[3]), math.cos(z[3])
        sp, cp = math.sin(z[4]), math.cos(z[4])
        u0, u1, u2 = st * cp, st * sp, ct
        n0 = f[0][0] * u0 + f[0][1] * u1 + f[0][2] * u2
        n1 = f[1][0] * u0 + f[1][1] * u1 + f[1][2] * u2
        n2 = f[2][0] * u0 + f[2][1] * u1 + f[2][2] * u2
        pi = math.sqrt(z[8] ** 2 + (z[9] / st) ** 2)
        B = 1.0 + (z[5] * n0 + z[6] * n1 + z[7] * n2) / (m * c) - pi / (abs(a1) * m * ell * c)
        return (z[5] ** 2 + z[6] ** 2 + z[7] ** 2) / (2 * m) + 0.5 * m * c * c * ratio * B * B

    return H


def hamilton_flow(params: RotatorParams, initial: RotatorState, t_end: float,
                  dt: float = 1e-2, step: float = 1e-3) -> Trajectory:
    """Integrate Hamilton's equations of a free non-degenerate rotator.

    Canonical chart coordinates are used, with the polar axis along
    n x ndot so that the orbit starts on the equator.  Gradients of H are
    fourth-order central differences with spacing ``step``.
    """
    n0 = initial.n
    omega = float(np.linalg.norm(initial.ndot))
    if omega == 0.0:
        raise NonRotatingState("Hamilton flow needs |ndot| > 0")
    s0 = initial.ndot / omega
    frame = np.column_stack([n0, s0, np.cross(n0, s0)])
    mom = mechanics.canonical_momenta(params, initial)
    # theta = pi/2, phi = 0: u_theta = -e_z, u_phi = e_y in the local frame
    _, u_t, u_p = sphere_basis(0.5 * math.pi, 0.0)
    z0 = np.array([*initial.x, 0.5 * math.pi, 0.0, *mom.p,
                   mom.pi @ (frame @ u_t), mom.pi @ (frame @ u_p)])
    mechanics.hamiltonian(params, n0, mom.p, mom.pi)  # sign condition / degeneracy checks
    H = _scalar_hamiltonian(params, frame)
    cfg = numdiff.DiffSettings(step=step, order=numdiff.DiffOrder.CENTRAL4)
    cols = list(range(10))

    def rhs(t, z):
        grad = numdiff.gradient(H, z, cols, cfg)
        return np.concatenate([grad[5:], -grad[:5]])

    nsteps, h = _steps(initial.t, IntegratorConfig(dt=dt, t_end=t_end))
    ts, zs = _rk4(rhs, initial.t, z0, h, nsteps)
    xs, vs, ns, nds = [], [], [], []
    for z in zs:
        n, u_t, u_p = (frame @ b for b in sphere_basis(z[3], z[4]))
        pi = z[8] * u_t + z[9] * u_p / math.sin(z[3]) ** 2
        v, nd = mechanics.velocities_from_momenta(params, n, z[5:8], pi)
        xs.append(z[:3])
        vs.append(v)
        ns.append(n)
        nds.append(nd - (n @ nd) * n)
    return Trajectory.from_states(params, None, ts, xs, vs, ns, nds)


def false_hamiltonian_flow(params: RotatorParams, initial: RotatorState, times):
    """Flow of p^2/2m: uniform translation with n frozen.  Returns (x, n) arrays."""
    times = np.asarray(times, float)
    p = mechanics.canonical_momenta(params, initial).p
    x = initial.x + np.outer(times - initial.t, p / params.m)
    n = np.tile(initial.n, (len(times), 1))
    return x, n


def path_distance(a: Trajectory, b: Trajectory) -> float:
    """Upper bound on the Hausdorff distance between the sphere paths n(s).

    Both paths are compared over their common arc-length range, matching
    points of equal s (cubic Hermite interpolation with dn/ds = ndot/|ndot|).
    """
    if a.s is None or b.s is None or a.ndot is None or b.ndot is None:
        raise ValueError("trajectories need arc length and ndot")
    lo = max(a.s[0], b.s[0])
    hi = min(a.s[-1], b.s[-1])
    if not hi > lo:
        raise ValueError("paths share no arc-length range")

    def one_way(p, q):
        spline = CubicHermiteSpline(q.s, q.n, q.ndot / q.omega[:, None], axis=0)
        mask = (p.s >= lo) & (p.s <= hi)
        return float(np.max(np.linalg.norm(spline(p.s[mask]) - p.n[mask], axis=1)))

    return max(one_way(a, b), one_way(b, a))
