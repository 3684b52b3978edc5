"""Finite-difference derivatives of Lagrangian-like functions L(q, qdot, t).

These are the ground truth against which every closed-form expression in
:mod:`rotators.mechanics` is checked, so nothing here knows about rotators.

A point is either a :class:`~rotators.model.ChartState` (then ``f`` takes a
ChartState) or a tuple ``(q, qdot, t)`` of any dimension (then ``f`` is
called as ``f(q, qdot, t)``).  The tuple form avoids object construction and
is what the mechanics layer uses internally.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteEvaluation
from .model import ChartState


class DiffOrder(str, enum.Enum):
    CENTRAL2 = "central2"
    CENTRAL4 = "central4"


_D1 = {
    DiffOrder.CENTRAL2: ((-1, -0.5), (1, 0.5)),
    DiffOrder.CENTRAL4: ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)),
}
_D2 = {
    DiffOrder.CENTRAL2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    DiffOrder.CENTRAL4: ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12)),
}


@dataclass(frozen=True)
class DiffSettings:
    step: float = 1e-5
    order: DiffOrder = DiffOrder.CENTRAL2

    def __post_init__(self):
        object.__setattr__(self, "order", DiffOrder(self.order))
        if not (1e-9 <= self.step <= 1e-2):
            raise ValueError(f"step must lie in [1e-9, 1e-2], got {self.step}")


DEFAULT = DiffSettings()


def _flatten(f, s):
    """Return (F, z0, ndof) where F acts on z = (q, qdot, t)."""
    if isinstance(s, ChartState):
        frame = s.frame

        def F(z):
            return f(ChartState.from_coords(frame, z[:5], z[5:10], z[10]))

        z0 = np.concatenate([s.q, s.qdot, [s.t]])
        return F, z0, 5

    q, qdot, t = s
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    ndof = q.size

    def F(z):
        return f(z[:ndof], z[ndof:2 * ndof], z[2 * ndof])

    return F, np.concatenate([q, qdot, [float(t)]]), ndof


def _call(F, z):
    value = float(F(z))
    if not math.isfinite(value):
        raise NonFiniteEvaluation(f"function returned {value} at {z}")
    return value


def gradient(F, z0, cols, cfg: DiffSettings = DEFAULT):
    """Central-difference gradient of F with respect to the components ``cols``."""
    h = cfg.step
    out = np.empty(len(cols))
    for k, i in enumerate(cols):
        acc = 0.0
        for offset, w in _D1[cfg.order]:
            z = z0.copy()
            z[i] += offset * h
            acc += w * _call(F, z)
        out[k] = acc / h
    return out


def _second(F, z0, i, j, h, order, f0=None):
    if i == j:
        acc = 0.0
        for offset, w in _D2[order]:
            if offset == 0:
                acc += w * (f0 if f0 is not None else _call(F, z0))
                continue
            z = z0.copy()
            z[i] += offset * h
            acc += w * _call(F, z)
        return acc / (h * h)
    acc = 0.0
    for oi, wi in _D1[order]:
        for oj, wj in _D1[order]:
            z = z0.copy()
            z[i] += oi * h
            z[j] += oj * h
            acc += wi * wj * _call(F, z)
    return acc / (h * h)


def mixed(F, z0, rows, cols, cfg: DiffSettings = DEFAULT, symmetric=False):
    """Matrix of second derivatives d^2 F / dz[rows[a]] dz[cols[b]].

    With ``symmetric=True`` (rows == cols) only the upper triangle is
    evaluated and mirrored.
    """
    h = cfg.step
    f0 = _call(F, z0)
    out = np.empty((len(rows), len(cols)))
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            if symmetric and b < a:
                out[a, b] = out[b, a]
                continue
            out[a, b] = _second(F, z0, i, j, h, cfg.order, f0)
    return out


def grad_velocity(f, s, cfg: DiffSettings = DEFAULT):
    """dL/dqdot at the point ``s``."""
    F, z0, n = _flatten(f, s)
    return gradient(F, z0, range(n, 2 * n), cfg)


def grad_position(f, s, cfg: DiffSettings = DEFAULT):
    """dL/dq at the point ``s``."""
    F, z0, n = _flatten(f, s)
    return gradient(F, z0, range(n), cfg)


def _scaled(f, s, q_scale, v_scale):
    """Rescale coordinates so one step size suits all of them.

    Returns (g, point, sq, sv) with g(Q, U, t) = f(sq*Q, sv*U, t); derivatives
    of g convert back to derivatives of f by dividing by the scales.
    """
    F, z0, n = _flatten(f, s)
    sq = np.ones(n) if q_scale is None else np.asarray(q_scale, dtype=float)
    sv = np.ones(n) if v_scale is None else np.asarray(v_scale, dtype=float)

    def g(Q, U, t):
        return F(np.concatenate([sq * Q, sv * U, [t]]))

    return g, (z0[:n] / sq, z0[n:2 * n] / sv, z0[2 * n]), sq, sv


def hessian_velocity(f, s, cfg: DiffSettings = DEFAULT, raw=False, v_scale=None):
    """Velocity Hessian d^2 L / dqdot_i dqdot_j.

    By default the upper triangle is evaluated and mirrored.  ``raw=True``
    evaluates both triangles independently (to inspect stencil asymmetry).
    ``v_scale`` multiplies the step per velocity component.
    """
    if v_scale is not None:
        g, point, _, sv = _scaled(f, s, None, v_scale)
        return hessian_velocity(g, point, cfg, raw) / np.outer(sv, sv)
    F, z0, n = _flatten(f, s)
    cols = list(range(n, 2 * n))
    return mixed(F, z0, cols, cols, cfg, symmetric=not raw)


def el_blocks(L, s, cfg: DiffSettings = DEFAULT, q_scale=None, v_scale=None):
    """Blocks of the expanded Euler-Lagrange equations.

    Returns ``(A, B, c_t, g)`` with A_ij = d^2L/dqdot_i dqdot_j,
    B_ij = d^2L/dqdot_i dq_j, c_t = d^2L/dt dqdot and g = dL/dq so that
    ``A @ qddot = -B @ qdot - c_t + g`` along solutions.  ``q_scale`` and
    ``v_scale`` multiply the step per coordinate and per velocity.
    """
    if q_scale is not None or v_scale is not None:
        G, point, sq, sv = _scaled(L, s, q_scale, v_scale)
        A, B, c_t, g = el_blocks(G, point, cfg)
        return A / np.outer(sv, sv), B / np.outer(sv, sq), c_t / sv, g / sq
    F, z0, n = _flatten(L, s)
    vel = list(range(n, 2 * n))
    pos = list(range(n))
    A = mixed(F, z0, vel, vel, cfg, symmetric=True)
    B = mixed(F, z0, vel, pos, cfg)
    c_t = mixed(F, z0, vel, [2 * n], cfg)[:, 0]
    g = gradient(F, z0, pos, cfg)
    return A, B, c_t, g


def el_residual(L, s, qddot, cfg: DiffSettings = DEFAULT):
    """A qddot + B qdot + c_t - g; zero on solutions of the Euler-Lagrange equations."""
    A, B, c_t, g = el_blocks(L, s, cfg)
    qdot = s.qdot if isinstance(s, ChartState) else np.asarray(s[1], dtype=float)
    return A @ np.asarray(qddot, dtype=float) + B @ qdot + c_t - g
