import math

import numpy as np
import pytest

from rotators import numdiff
from rotators.errors import NonFiniteEvaluation
from rotators.model import ChartState


def quad_L(q, qdot, t):
    # L = qdot^T M qdot / 2 + q.qdot t - |q|^2 / 2 with a fixed symmetric M
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    return 0.5 * qdot @ M @ qdot + t * (q @ qdot) - 0.5 * (q @ q)


def test_settings_bounds():
    with pytest.raises(ValueError):
        numdiff.DiffSettings(step=1e-1)
    with pytest.raises(ValueError):
        numdiff.DiffSettings(step=1e-12)
    assert numdiff.DiffSettings(order="central4").order is numdiff.DiffOrder.CENTRAL4


@pytest.mark.parametrize("order", list(numdiff.DiffOrder))
def test_blocks_of_quadratic_lagrangian(order):
    cfg = numdiff.DiffSettings(1e-3, order)
    q, qd, t = np.array([0.4, -1.0]), np.array([0.2, 0.7]), 1.5
    A, B, c_t, g = numdiff.el_blocks(quad_L, (q, qd, t), cfg)
    assert np.allclose(A, [[2.0, 0.3], [0.3, 1.0]], atol=1e-7)
    assert np.allclose(B, t * np.eye(2), atol=1e-7)
    assert np.allclose(c_t, q, atol=1e-7)
    assert np.allclose(g, t * qd - q, atol=1e-7)


def test_fourth_order_beats_second_order():
    f = lambda q, qd, t: math.exp(qd[0]) * math.sin(q[0])
    s = (np.array([0.3]), np.array([0.5]), 0.0)
    exact = math.exp(0.5) * math.sin(0.3)
    e2 = abs(numdiff.grad_velocity(f, s, numdiff.DiffSettings(1e-2, "central2"))[0] - exact)
    e4 = abs(numdiff.grad_velocity(f, s, numdiff.DiffSettings(1e-2, "central4"))[0] - exact)
    assert e4 < e2 / 100


def test_raw_hessian_is_nearly_symmetric():
    f = lambda q, qd, t: math.sin(qd[0] * qd[1]) + qd[0] ** 3
    s = (np.zeros(2), np.array([0.4, 0.9]), 0.0)
    H = numdiff.hessian_velocity(f, s, raw=True)
    assert abs(H[0, 1] - H[1, 0]) < 1e-6


def test_chart_state_points_are_accepted():
    s = ChartState(np.eye(3), 1.0, 0.5, 0.2, 0.3, [0, 0, 0], [0.1, 0, 0])
    f = lambda cs: 0.5 * (cs.qdot @ cs.qdot)
    assert np.allclose(numdiff.grad_velocity(f, s), s.qdot, atol=1e-9)


def test_non_finite_values_raise():
    f = lambda q, qd, t: math.inf
    with pytest.raises(NonFiniteEvaluation):
        numdiff.grad_position(f, (np.zeros(1), np.zeros(1), 0.0))


def test_el_residual_vanishes_on_harmonic_oscillator():
    L = lambda q, qd, t: 0.5 * qd @ qd - 0.5 * q @ q
    t = 0.8
    q, qd, qdd = np.array([math.cos(t)]), np.array([-math.sin(t)]), np.array([-math.cos(t)])
    cfg = numdiff.DiffSettings(1e-3, "central4")
    assert abs(numdiff.el_residual(L, (q, qd, t), qdd, cfg)[0]) < 1e-10
