"""The twelve acceptance criteria, one test each.

Every test appends a PASS/FAIL line to ``conftest.ACCEPTANCE_LINES`` (echoed
in the pytest terminal summary) before asserting.  Run this file directly
to get the same lines without pytest.
"""
import json
import math
import subprocess
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from rotators import analytic as A, cli, dynamics as D, mechanics as M
from rotators.errors import ConstraintViolatedAtStart, DegenerateLegendreMap
from rotators.model import FieldConfig, RotatorParams, RotatorState, to_chart

from conftest import ACCEPTANCE_LINES

N_STATES = 1000
S0 = RotatorState(0.0, [0, 0, 0], [0.05, -0.02, 0.03], [0.6, 0.8, 0.0], [0, 0, 0.7])


def record(k, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def sample_state(rng, omega=(0.05, 1.0), vmax=0.1):
    """|ndot| uniform in ``omega``, v uniform in the ball |v| <= vmax (c = 1)."""
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    u = rng.normal(size=3)
    u -= (u @ n) * n
    u *= rng.uniform(*omega) / np.linalg.norm(u)
    v = rng.normal(size=3)
    v *= vmax * rng.uniform() ** (1 / 3) / np.linalg.norm(v)
    return RotatorState(0.0, rng.normal(size=3), v, n, u)


def test_criterion_01_hessian_oracle():
    rng = np.random.default_rng(101)
    rel = 0.0
    for _ in range(N_STATES):
        a1 = rng.uniform(-1.5, -0.5)
        p = RotatorParams(a1=a1, a2=a1 * a1 + rng.uniform(0.3, 2.0))
        ch = to_chart(sample_state(rng))
        want = M.hessian_determinant_closed(p, ch)
        got = np.linalg.det(M.hessian_numeric(p, ch))
        rel = max(rel, abs(got - want) / abs(want))
    deg = 0.0
    for _ in range(N_STATES):
        a1 = rng.uniform(-1.5, -0.5)
        p = RotatorParams(a1=a1, a2=a1 * a1)
        deg = max(deg, abs(M.scaled_determinant(M.hessian_numeric(p, to_chart(sample_state(rng))))))
    record(1, rel < 1e-5 and deg < 1e-8,
           f"det relative error {rel:.2e} (< 1e-5), degenerate scaled |det| {deg:.2e} (< 1e-8)")


def test_criterion_02_kernel():
    rng = np.random.default_rng(102)
    worst, dims_ok, empty_ok = 0.0, True, True
    for _ in range(N_STATES):
        a1 = rng.uniform(-1.5, -0.5)
        ch = to_chart(sample_state(rng))
        p = RotatorParams(a1=a1, a2=a1 * a1)
        k = M.nullifying_kernel(p, ch)
        if k.dim != 1:
            dims_ok = False
            continue
        eta = M.nullifying_direction(p, ch)
        eta = eta / np.linalg.norm(eta)
        worst = max(worst, float(np.linalg.norm(k.vectors[0] - eta)))
        q = RotatorParams(a1=a1, a2=a1 * a1 + rng.uniform(0.3, 2.0))
        empty_ok &= M.nullifying_kernel(q, ch).dim == 0
    record(2, dims_ok and empty_ok and worst < 1e-6,
           f"degenerate kernel dim 1 at all states: {dims_ok}, |k - eta| max {worst:.2e} (< 1e-6), "
           f"non-degenerate kernel empty: {empty_ok}")


def test_criterion_03_off_shell_identity():
    rng = np.random.default_rng(103)
    p = RotatorParams(a1=-1.0, a2=1.0)
    worst = max(abs(M.constraint_residual_general(p, to_chart(sample_state(rng))))
                for _ in range(N_STATES))
    record(3, worst < 1e-8, f"max |eta . EL| at {N_STATES} off-shell states {worst:.2e} (< 1e-8)")


def test_criterion_04_conservation():
    tr = D.integrate(RotatorParams(a1=-1.0, a2=2.0), S0, None, D.IntegratorConfig(1e-3, 100.0))
    dp = float(np.max(np.linalg.norm(tr.p - tr.p[0], axis=1)))
    dG = float(np.max(np.abs(tr.energy - tr.energy[0])))
    dW = float(np.max(np.abs(tr.omega - tr.omega[0])))
    record(4, dp < 1e-9 and dG < 1e-8 and dW < 1e-8,
           f"|dp| {dp:.2e} (< 1e-9), |dG| {dG:.2e} (< 1e-8), |dOmega| {dW:.2e} (< 1e-8) over t = 100")


def test_criterion_05_indeterminacy():
    p = RotatorParams(a1=-1.0, a2=1.0)
    s = RotatorState(0, [0, 0, 0], [0.05, 0.02, 0.01], [1, 0, 0], [0, 0.5, 0.1])
    w = s.omega
    cfg = D.IntegratorConfig(1e-3, 10.0)
    a = D.integrate(p, s, None, cfg, D.GaugeFrequency.constant(w))
    b = D.integrate(p, s, None, cfg, D.GaugeFrequency.sinusoidal(w, 0.3, 1.0))
    dist = D.path_distance(a, b)
    diff = float(max(np.abs(a.x[-1] - b.x[-1]).max(), np.abs(a.n[-1] - b.n[-1]).max(),
                     np.abs(a.v[-1] - b.v[-1]).max()))
    res = max(D.verify_solution(p, a).max_residual, D.verify_solution(p, b).max_residual)
    record(5, dist < 1e-7 and diff > 1e-2 and res < 1e-6,
           f"path distance {dist:.2e} (< 1e-7), state difference at t = 10 {diff:.3f} (> 1e-2), "
           f"EL residual {res:.2e} (< 1e-6)")


def test_criterion_06_legendre_and_hamilton():
    rng = np.random.default_rng(106)
    p = RotatorParams(a1=-1.0, a2=2.0)
    trip = 0.0
    for _ in range(N_STATES):
        s = sample_state(rng)
        mom = M.canonical_momenta(p, s)
        v, nd = M.velocities_from_momenta(p, s.n, mom.p, mom.pi)
        back = M.canonical_momenta(p, RotatorState(0.0, s.x, v, s.n, nd))
        trip = max(trip, np.abs(back.p - mom.p).max(), np.abs(back.pi - mom.pi).max())
    h = D.hamilton_flow(p, S0, 10.0, dt=1e-2)
    lg = D.integrate(p, S0, None, D.IntegratorConfig(1e-2, 10.0))
    flow = float(max(np.abs(h.x - lg.x).max(), np.abs(h.v - lg.v).max(),
                     np.abs(h.n - lg.n).max(), np.abs(h.ndot - lg.ndot).max()))
    s = sample_state(rng)
    mom = M.canonical_momenta(p, s)
    try:
        M.velocities_from_momenta(RotatorParams(a1=-1.0, a2=1.0), s.n, mom.p, mom.pi)
        raised = False
    except DegenerateLegendreMap:
        raised = True
    record(6, trip < 1e-10 and flow < 1e-6 and raised,
           f"momenta round trip {trip:.2e} (< 1e-10), Hamilton vs Lagrange flow {flow:.2e} (< 1e-6), "
           f"DegenerateLegendreMap raised: {raised}")


def test_criterion_07_omega_dot_law():
    p = RotatorParams(a1=-1.0, a2=2.0, charge=0.5)
    fld = FieldConfig.uniform_e([0.1, -0.05, 0.08])
    tr = D.integrate(p, S0, fld, D.IntegratorConfig(1e-3, 10.0))
    h = 1e-3
    w = tr.omega
    fd = (w[:-4] - 8 * w[1:-3] + 8 * w[3:-1] - w[4:]) / (12 * h)
    law = np.array([M.omega_dot_law(p, tr.state(i), fld) for i in range(2, len(tr) - 2)])
    err = float(np.abs(fd - law).max())
    record(7, err < 1e-6, f"|dOmega/dt (finite difference) - law| {err:.2e} (< 1e-6), "
                          f"|dOmega/dt| up to {np.abs(law).max():.3f}")


def test_criterion_08_false_constraint():
    p = RotatorParams(a1=-1.0, a2=1.0, charge=0.5)
    cfg = D.IntegratorConfig(1e-2, 1.0)
    g = D.GaugeFrequency.constant(S0.omega)
    rejected = 0
    for fld in (FieldConfig.uniform_e([0.3, 0.0, 0.0]), FieldConfig.uniform_h([0.0, 0.0, 0.5])):
        try:
            D.integrate(p, S0, fld, cfg, g)
        except ConstraintViolatedAtStart:
            rejected += 1
    helix = A.example2_helix(RotatorParams(a1=-1.0, a2=1.0, ell=0.01), 0.5, 0.05, 1.0, [0, 0, 0.1])
    s = helix.state(0.0)
    tr = D.integrate(helix.params, s, helix.field, D.IntegratorConfig(1e-3, 20.0),
                     D.GaugeFrequency.constant(s.omega))
    hres = float(np.abs(tr.lorentz_residual).max())
    pe = RotatorParams(a1=-1.0, a2=1.0, charge=1.0)
    fam = A.example1_family(pe, 0.01, [0, 0, 0], [0.02, 0.01, 0],
                            lambda t: math.sin(0.3 * t) + 0.5 * t,
                            lambda t: 0.3 * math.cos(0.3 * t) + 0.5)
    ts = np.linspace(0.0, 10.0, 41)
    nE = max(abs(fam.state(t).n @ fam.field.E0) for t in ts)
    reduced = D.verify_solution(pe, fam, fam.field, times=ts, system="reduced").max_residual
    full = D.verify_solution(pe, fam, fam.field, times=ts).per_equation
    record(8, rejected == 2 and hres < 1e-9 and nE == 0.0 and reduced < 1e-6,
           f"violating starts rejected {rejected}/2, helix residual {hres:.2e} (< 1e-9), "
           f"family n.E = {nE:g}, plane-confined EL residual {reduced:.2e} (< 1e-6); "
           f"out-of-plane equation of the unconstrained system: {full[3]:.2e}")


def _circle_frequency(t, xy):
    # algebraic circle fit, then the slope of the unwrapped polar angle
    M_ = np.column_stack([xy[:, 0], xy[:, 1], np.ones(len(t))])
    sol = np.linalg.lstsq(M_, -(xy ** 2).sum(axis=1), rcond=None)[0]
    centre = -0.5 * sol[:2]
    ang = np.unwrap(np.arctan2(xy[:, 1] - centre[1], xy[:, 0] - centre[0]))
    return float(np.polyfit(t, ang, 1)[0])


def test_criterion_09_planar_frequency():
    p = RotatorParams(a1=-1.0, a2=1.0, ell=0.1)
    R, wL = 1.0, 0.1
    want = wL / (1 + p.a1 * p.ell / R)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        helix = A.example2_helix(p, R, 0.0, 1.0, [0.0, 0.0, wL])
    s = helix.state(0.0)
    tr = D.integrate(helix.params, s, helix.field, D.IntegratorConfig(1e-3, 60.0),
                     D.GaugeFrequency.constant(s.omega))
    got = _circle_frequency(tr.t, tr.x[:, :2])
    rel = abs(got - want) / want
    res = D.verify_solution(helix.params, tr, helix.field, max_points=100).max_residual
    # H0 -> 0: distance to the free motion from the same start over t in [0, 10]
    devs = []
    for H in (1e-1, 1e-2, 1e-3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hx = A.example2_helix(p, R, 0.0, 1.0, [0.0, 0.0, H])
        s = hx.state(0.0)
        g = D.GaugeFrequency.constant(s.omega)
        cfg = D.IntegratorConfig(1e-2, 10.0)
        a = D.integrate(hx.params, s, hx.field, cfg, g)
        b = D.integrate(hx.params, s, None, cfg, g)
        devs.append(float(np.abs(a.x - b.x).max()))
    shrinking = all(devs[i + 1] < 0.2 * devs[i] for i in range(len(devs) - 1))
    record(9, rel < 1e-6 and res < 1e-6 and shrinking,
           f"orbit frequency {got:.10f} vs {want:.10f} (rel {rel:.1e}, < 1e-6), EL residual {res:.1e}; "
           f"distance to free motion for H0 = 1e-1, 1e-2, 1e-3: "
           + ", ".join(f"{d:.1e}" for d in devs))


def test_criterion_10_quadrature():
    p = RotatorParams(a1=-1.0, a2=2.0)
    mu, omega, Y0 = 0.05, 0.5, 0.55
    p0 = mu * (p.c * abs(p.a1) + p.gap * p.ell * omega) * np.array([1.0, 0.0, 0.0])
    n = np.array([Y0, math.sqrt(1 - Y0 ** 2), 0.0])
    s = RotatorState(0.0, [0, 0, 0], p0 / p.m + p.a1 * p.ell * omega * n, n, [0, 0, omega])
    sol = A.quadrature_for_state(p, s)
    tr = D.integrate(p, s, None, D.IntegratorConfig(1e-3, 4 * math.pi / omega))
    Y = tr.n @ (sol.p0 / np.linalg.norm(sol.p0))
    idx = np.arange(0, len(tr), 50)
    quad = max(abs(A.Y_of_s(sol, tr.s[i]) - Y[i]) for i in idx)
    circ = float(np.abs(A.circle_approximation(sol, tr.s) - Y).max())
    bound = 2 * mu * mu
    record(10, quad < 1e-6 and circ < bound,
           f"mu = {sol.mu:.3f}: integrator vs quadrature {quad:.1e} (< 1e-6); circle approximation "
           f"error {circ:.2e} vs 2 mu^2 = {bound:.1e} (error is about 2 mu a^2, first order in mu)")


def test_criterion_11_rk4_order():
    p = RotatorParams(a1=-1.0, a2=2.0, charge=0.2)
    fld = FieldConfig.uniform_h([0.0, 0.1, 0.2])

    def end(dt):
        tr = D.integrate(p, S0, fld, D.IntegratorConfig(dt, 10.0))
        return np.concatenate([tr.x[-1], tr.v[-1], tr.n[-1], tr.ndot[-1]])

    ref = end(6.25e-4)
    errs = [np.abs(end(dt) - ref).max() for dt in (0.04, 0.02, 0.01)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    record(11, min(ratios) >= 14, f"error ratios on halving dt: {ratios[0]:.2f}, {ratios[1]:.2f} (>= 14)")


def _cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "rotators.cli", *args], capture_output=True,
                          text=True, cwd=cwd)


def test_criterion_12_cli():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        # round trip: parse . serialize . parse is a fixed point
        fixed = True
        for cfg in cli.example_configs().values():
            text = cli.serialize_config(cfg)
            fixed &= cli.serialize_config(cli.parse_config(text)) == text
        free = {"params": {"a1": -1.0, "a2": 2.0, "charge": 0.2},
                "initial": {"v": [0.05, -0.02, 0.03], "n": [0.6, 0.8, 0.0], "ndot": [0.0, 0.0, 0.7]},
                "field": {"kind": "uniform_h", "H0": [0.0, 0.1, 0.2]},
                "integrator": {"dt": 1e-3, "t_end": 2.0}, "output": {"path": "g.csv", "every": 5}}
        (tmp / "free.json").write_text(json.dumps(free))
        text = cli.serialize_config(cli.load_config(tmp / "free.json"))
        fixed &= cli.serialize_config(cli.parse_config(text)) == text
        # golden files from two consecutive runs
        r1 = _cli("simulate", "--config", str(tmp / "free.json"), "--out", str(tmp / "run1.csv"))
        r2 = _cli("simulate", "--config", str(tmp / "free.json"), "--out", str(tmp / "run2.csv"))
        golden = (r1.returncode == 0 and r2.returncode == 0
                  and (tmp / "run1.csv").read_bytes() == (tmp / "run2.csv").read_bytes())
        e1 = _cli("examples", "--which", "2", "--out", str(tmp / "ex"), "--run")
        golden &= e1.returncode == 0
        # error paths
        def doc(**kw):
            d = json.loads(json.dumps(free))
            d.update(kw)
            return d
        deg = {"a1": -1.0, "a2": 1.0, "charge": 0.5}
        cases = {
            "parse_error": "{not json",
            "validation_error": doc(extra=1),
            "constraint_violated_at_start": doc(params=deg, gauge={"kind": "constant", "omega0": 0.7},
                                                field={"kind": "uniform_h", "H0": [0.0, 0.0, 0.5]}),
            "unsupported_degenerate_field": doc(params=deg, gauge={"kind": "constant", "omega0": 0.7},
                                                field={"kind": "plane_wave", "E0": [0.1, 0, 0],
                                                       "k": [0, 0, 1.0]}),
            "gauge_mismatch": doc(params=deg, gauge={"kind": "constant", "omega0": 0.3},
                                  field={"kind": "none"}),
        }
        failures = []
        for code, content in cases.items():
            path = tmp / f"{code}.json"
            path.write_text(content if isinstance(content, str) else json.dumps(content))
            r = _cli("simulate", "--config", str(path))
            if r.returncode == 0 or not r.stderr.startswith(f"error:{code}:"):
                failures.append(code)
        for code, args in (("io", ("simulate", "--config", str(tmp / "missing.json"))),
                           ("usage", ("simulate",)), ("usage", ("frobnicate",)),
                           ("config", ())):
            r = _cli(*args)
            if r.returncode == 0 or not r.stderr.startswith(f"error:{code}:"):
                failures.append(code)
    record(12, fixed and golden and not failures,
           f"round trip fixed point: {fixed}, golden CSV identical across runs: {golden}, "
           f"error paths without their code prefix: {failures or 'none'}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            t0 = time.perf_counter()
            try:
                fn()
            except AssertionError:
                failed += 1
            print(f"    ({time.perf_counter() - t0:.1f} s)")
    sys.exit(1 if failed else 0)
