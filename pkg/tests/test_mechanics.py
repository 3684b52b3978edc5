import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotators import mechanics as M, numdiff
from rotators.dynamics import closed_form_accelerations
from rotators.errors import (DegenerateLegendreMap, DegenerateSystem, NonDegenerateSystem,
                             NonRotatingState, SignConditionViolated)
from rotators.model import FieldConfig, RotatorParams, RotatorState, to_chart

from conftest import random_state

FIELDS = [FieldConfig.none(), FieldConfig.uniform_e([0.1, -0.2, 0.3]),
          FieldConfig.uniform_h([0.2, 0.1, -0.3]),
          FieldConfig.plane_wave([0.2, 0.1, 0.0], [0.0, 0.0, 1.0], 0.3)]


def test_lagrangian_chart_and_vector_forms_agree(rng, natural):
    p = natural.replace(charge=0.6)
    for fld in FIELDS:
        s = random_state(rng)
        ch = to_chart(s)
        L = M.chart_lagrangian(p, fld, ch.frame)
        assert L(ch.q, ch.qdot, ch.t) == pytest.approx(M.lagrangian_value(p, s, fld), abs=1e-13)


def test_lagrangian_needs_rotation(natural):
    s = RotatorState(0, [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0])
    with pytest.raises(NonRotatingState):
        M.lagrangian_value(natural, s)
    # a point-like kinetic term alone is fine at rest
    assert M.lagrangian_value(RotatorParams(a1=0.0, a2=1.0), s) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(range(len(FIELDS))))
def test_momenta_match_finite_differences(seed, k):
    rng = np.random.default_rng(seed)
    p = RotatorParams(a1=-1.3, a2=2.1, charge=0.5)
    s = random_state(rng)
    ch = to_chart(s)
    L = M.chart_lagrangian(p, FIELDS[k], ch.frame)
    fd = numdiff.grad_velocity(L, (ch.q, ch.qdot, ch.t), M.oracle_settings(s.omega))
    assert np.allclose(M.chart_momenta(p, ch, FIELDS[k]), fd, atol=1e-9)


def test_sphere_momentum_is_tangent(rng, natural):
    s = random_state(rng)
    mom = M.canonical_momenta(natural, s)
    assert abs(mom.pi @ s.n) < 1e-14


def test_energy_function_is_legendre_transform(rng):
    p = RotatorParams(a1=-0.7, a2=1.9, charge=0.4)
    for fld in FIELDS[:3]:  # static fields: G equals qdot.dL/dqdot - L with Phi included
        s = random_state(rng)
        ch = to_chart(s)
        L = M.chart_lagrangian(p, fld, ch.frame)
        mom = numdiff.grad_velocity(L, (ch.q, ch.qdot, ch.t), M.oracle_settings(s.omega))
        expected = mom @ ch.qdot - L(ch.q, ch.qdot, ch.t)
        assert M.energy_function(p, s, fld) == pytest.approx(expected, abs=1e-9)


def test_hessian_form_matches_matrix(rng, natural):
    for _ in range(20):
        s = random_state(rng)
        ch = to_chart(s)
        H = M.hessian_matrix_closed(natural, ch)
        dq = rng.normal(size=5)
        e_t, e_p = ch.tangent_basis
        probe = M.HessianProbe(dq[:3], dq[3] * e_t + dq[4] * e_p)
        assert 2 * M.hessian_form_value(natural, s, probe) == pytest.approx(dq @ H @ dq, rel=1e-12)


def test_nullifying_variation_zero_only_when_degenerate(rng, natural, defective):
    s = random_state(rng)
    assert abs(M.hessian_form_value(defective, s, M.nullifying_variation(defective, s))) < 1e-14
    assert M.hessian_form_value(natural, s, M.nullifying_variation(natural, s)) > 1e-3


def test_probe_must_be_tangent(rng, natural):
    s = random_state(rng)
    with pytest.raises(ValueError):
        M.hessian_form_value(natural, s, M.HessianProbe(np.zeros(3), s.n))


def test_closed_hessian_matches_numeric(rng):
    p = RotatorParams(a1=-1.2, a2=2.5)
    for _ in range(20):
        ch = to_chart(random_state(rng))
        Hc = M.hessian_matrix_closed(p, ch)
        Hn = M.hessian_numeric(p, ch)
        assert np.abs(Hc - Hn).max() < 1e-7 * np.abs(Hc).max()


def test_determinant_matches_momentum_form(rng, natural):
    # det = m^4 l^2 (a2 - a1^2) (pi.ndot / ndot.ndot) sin^2 theta
    for _ in range(10):
        s = random_state(rng)
        ch = to_chart(s)
        pi = M.canonical_momenta(natural, s).pi
        alt = natural.m ** 4 * natural.ell ** 2 * natural.gap * (pi @ s.ndot) / (s.ndot @ s.ndot) \
            * math.sin(ch.theta) ** 2
        assert M.hessian_determinant_closed(natural, ch) == pytest.approx(alt, rel=1e-12)
        assert np.linalg.det(M.hessian_matrix_closed(natural, ch)) == pytest.approx(alt, rel=1e-10)


def test_kernel_chart_order(rng, defective):
    s = random_state(rng)
    ch = to_chart(s)
    basis = M.nullifying_kernel(defective, ch)
    assert basis.dim == 1 and basis.rank == 4
    eta = M.nullifying_direction(defective, ch)
    eta /= np.linalg.norm(eta)
    assert np.linalg.norm(basis.vectors[0] - eta) < 1e-6
    # the swapped angular slots do not annihilate the Hessian unless theta_dot = phi_dot
    printed = M.nullifying_direction(defective, ch, order="printed")
    H = M.hessian_matrix_closed(defective, ch)
    assert np.linalg.norm(H @ printed) > 1e-3 * np.linalg.norm(H) * np.linalg.norm(printed)
    assert np.linalg.norm(H @ M.nullifying_direction(defective, ch)) < 1e-12


def test_kernel_example_point(defective):
    # n = e_x, ndot = Omega e_y (theta = pi/2, phi = 0, phi_dot = Omega) in the identity chart
    s = RotatorState(0, [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0.7, 0])
    ch = to_chart(s)
    eta = M.nullifying_direction(defective, ch)
    assert np.allclose(eta, [-0.7, 0, 0, 0, 0.7])


def test_lambda_multiplier_closes_the_equations(rng):
    p = RotatorParams(a1=-0.8, a2=1.7, charge=0.3)
    for fld in FIELDS:
        s = random_state(rng)
        vdot, nddot = closed_form_accelerations(p, s, fld)
        lam = M.lambda_multiplier(p, s, nddot)
        linear, sphere = M.unprojected_residuals(p, s, vdot, nddot, lam, fld)
        assert np.abs(linear).max() < 1e-12 and np.abs(sphere).max() < 1e-12


def test_lambda_on_great_circle():
    # a1 = 0, a2 = 1: Lambda = m l^2 Omega^2 / 2 for uniform great-circle motion
    p = RotatorParams(a1=0.0, a2=1.0, ell=0.5)
    s = RotatorState(0, [0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 2.0, 0])
    lam = M.lambda_multiplier(p, s, -4.0 * s.n)
    assert lam == pytest.approx(0.5 * p.m * p.ell ** 2 * 4.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_legendre_round_trip(seed):
    rng = np.random.default_rng(seed)
    p = RotatorParams(a1=-rng.uniform(0.3, 2.0), a2=0.0)
    p = p.replace(a2=p.a1 ** 2 + rng.uniform(0.2, 3.0))
    s = random_state(rng)
    mom = M.canonical_momenta(p, s)
    v, nd = M.velocities_from_momenta(p, s.n, mom.p, mom.pi)
    assert np.allclose(v, s.v, atol=1e-10) and np.allclose(nd, s.ndot, atol=1e-10)
    assert M.hamiltonian(p, s.n, mom.p, mom.pi) == pytest.approx(M.energy_function(p, s), rel=1e-12)


def test_legendre_a1_zero(rng):
    p = RotatorParams(a1=0.0, a2=1.5)
    s = random_state(rng)
    mom = M.canonical_momenta(p, s)
    v, nd = M.velocities_from_momenta(p, s.n, mom.p, mom.pi)
    assert np.allclose(v, s.v) and np.allclose(nd, s.ndot)


def test_legendre_failures(rng, defective, natural):
    s = random_state(rng)
    mom = M.canonical_momenta(natural, s)
    with pytest.raises(DegenerateLegendreMap):
        M.velocities_from_momenta(defective, s.n, mom.p, mom.pi)
    with pytest.raises(DegenerateSystem):
        M.hamiltonian(defective, s.n, mom.p, mom.pi)
    # here a1/(a2 - a1^2) < 0, so a small |pi| leaves the bracket with the wrong sign
    small = 1e-3 * mom.pi / np.linalg.norm(mom.pi)
    with pytest.raises(SignConditionViolated):
        M.velocities_from_momenta(natural, s.n, np.zeros(3), small)


def test_false_hamiltonian_equals_degenerate_energy(rng, defective):
    s = random_state(rng)
    p = M.canonical_momenta(defective, s).p
    assert M.false_hamiltonian(defective, p) == pytest.approx(M.energy_function(defective, s))


def test_omega_dot_law(rng):
    p = RotatorParams(a1=-1.0, a2=2.0, charge=0.7)
    fld = FIELDS[1]
    s = random_state(rng)
    _, nddot = closed_form_accelerations(p, s, fld)
    assert (s.ndot @ nddot) / s.omega == pytest.approx(M.omega_dot_law(p, s, fld), rel=1e-12)
    with pytest.raises(DegenerateSystem):
        M.omega_dot_law(p.replace(a2=1.0), s, fld)


def test_constraint_residual_general(rng, defective):
    with pytest.raises(NonDegenerateSystem):
        M.constraint_residual_general(RotatorParams(), to_chart(random_state(rng)))
    for _ in range(10):
        ch = to_chart(random_state(rng))
        assert abs(M.constraint_residual_general(defective, ch)) < 1e-8
    p = defective.replace(charge=0.9)
    for fld in FIELDS[1:]:
        s = random_state(rng)
        ch = to_chart(s)
        eta = M.nullifying_direction(p, ch)
        predicted = -p.charge * p.a1 * p.ell * s.omega \
            * M.lorentz_constraint_residual(s, fld) / np.linalg.norm(eta)
        assert M.constraint_residual_general(p, ch, fld) == pytest.approx(predicted, abs=1e-8)


def test_scaled_determinant_bounds(rng, natural):
    ch = to_chart(random_state(rng))
    assert 0 < abs(M.scaled_determinant(M.hessian_matrix_closed(natural, ch))) <= 1.0
