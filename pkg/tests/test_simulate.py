import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cases
from cases import P, V
from strategies import FUZZ_CHART, random_field
from varigeo.eomsolve import derive_dynamics, herglotz_el
from varigeo.errors import InitialConditionError, SingularLocusError
from varigeo.excalc import VecField, iota, parse_form
from varigeo.geomech import cartan_forms, herglotz_constraint, lagrangian_energy, split_transversal
from varigeo.simulate import (
    InitialConstraints,
    MonitorSpec,
    compile_field,
    form_drift,
    integrate,
    monitor,
)
from varigeo.symexpr import ONE, sym

G = 0.2


def harmonic():
    chart = cases.lagrangian_chart(action=False, params=())
    L = P("1/2*v^2 - 1/2*q^2", chart)
    return chart, L, derive_dynamics(cases.lagrangian_problem(L, chart))


def damped(g=G):
    chart = cases.lagrangian_chart()
    L = P("1/2*v^2 - 1/2*q^2 - g*s", chart)
    eta = herglotz_constraint(L, chart)
    return chart, L, eta, herglotz_el(L, eta), {"g": g}


def damped_closed_form(t, g=G):
    w = math.sqrt(1 - g * g / 4)
    return math.exp(-g * t / 2) * (math.cos(w * t) + g / (2 * w) * math.sin(w * t))


# --------------------------------------------------------------------------
# compilation


def test_compile_harmonic_rhs():
    _, _, dyn = harmonic()
    rhs = compile_field(dyn.Z)
    assert list(rhs(np.array([0.0, 0.3, -1.5]))) == [1.0, -1.5, -0.3]


def test_compile_damped_rhs():
    chart, L, _, dyn, params = damped()
    rhs = compile_field(dyn.Z, params)
    x = np.array([0.0, 0.5, 0.25, -1.0])
    Lx = 0.5 * 0.25**2 - 0.5 * 0.5**2 + G
    assert np.allclose(rhs(x), [1.0, 0.25, -0.5 - G * 0.25, Lx], rtol=0, atol=1e-15)


def test_compile_requires_parameter_values():
    from varigeo.errors import DomainError
    _, _, _, dyn, _ = damped()
    with pytest.raises(DomainError, match="g"):
        compile_field(dyn.Z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compile_agrees_with_eval(seed):
    rng = random.Random(seed)
    Z = random_field(rng, FUZZ_CHART, rational=True)
    rhs = compile_field(Z)
    for _ in range(100):
        x = np.array([rng.uniform(-2, 2) for _ in FUZZ_CHART.coordinates])
        try:
            ref = rhs.symbolic(x)
        except Exception:
            continue
        got = rhs(x)
        pt = rhs.state_dict(x)
        for n, a, b in zip(FUZZ_CHART.coordinates, got, ref):
            nv, ns, dv, ds = Z[n].eval_parts(pt)
            scale = abs(b) + (ns + abs(b) * ds) / abs(dv)
            assert abs(a - b) <= 1e-12 * scale


def test_singular_locus_reported_with_state(tqv):
    Z = VecField(tqv, {"t": ONE, "q": ONE / sym("q")})
    rhs = compile_field(Z)
    with pytest.raises(SingularLocusError) as err:
        rhs(np.array([0.0, 0.0, 1.0]))
    assert err.value.state == {"t": 0.0, "q": 0.0, "v": 1.0}
    with pytest.raises(SingularLocusError):
        integrate(compile_field(VecField(tqv, {"t": ONE, "q": -ONE, "v": P("log(q)", tqv)})),
                  {"q": 0.5, "v": 0.0}, 1.0, 0.25)


# --------------------------------------------------------------------------
# integration against closed forms


def test_harmonic_closed_form():
    _, _, dyn = harmonic()
    traj = integrate(compile_field(dyn.Z), {"t": 0.0, "q": 1.0, "v": 0.0}, 10.0, 1e-3)
    assert abs(traj.column("q")[-1] - math.cos(10)) < 1e-6
    assert traj.times[-1] == pytest.approx(10.0, abs=1e-12)
    assert np.all(np.diff(traj.times) > 0)


def test_rk4_order_on_harmonic():
    _, _, dyn = harmonic()
    rhs = compile_field(dyn.Z)
    errs = []
    for h in (0.2, 0.1, 0.05):
        traj = integrate(rhs, {"q": 1.0, "v": 0.0}, 10.0, h)
        errs.append(abs(traj.column("q")[-1] - math.cos(10)))
    for a, b in zip(errs, errs[1:]):
        assert 16 * 0.8 <= a / b <= 16 * 1.2


def test_damped_envelope_matches_closed_form():
    _, _, _, dyn, params = damped()
    traj = integrate(compile_field(dyn.Z, params), {"q": 1.0, "v": 0.0, "s": 0.0}, 10.0, 1e-3)
    ref = np.array([damped_closed_form(t) for t in traj.times])
    assert np.max(np.abs(traj.column("q") - ref)) < 1e-4


def test_vs_with_gauge_pin_is_exponential():
    chart = cases.lagrangian_chart()
    L = P("v*s", chart)
    dyn = herglotz_el(L, herglotz_constraint(L, chart), I0=[sym("v") - ONE])
    Z = VecField(chart, {n: dyn.on_surface(dyn.Z[n]) for n in chart.coordinates})
    traj = integrate(compile_field(Z), {"q": 0.0, "v": 1.0, "s": 1.0}, 10.0, 1e-3,
                     InitialConstraints([sym("v") - ONE]))
    assert abs(traj.column("s")[-1] / math.exp(10) - 1) < 1e-6


def test_span_as_interval_and_validation():
    _, _, dyn = harmonic()
    rhs = compile_field(dyn.Z)
    traj = integrate(rhs, {"q": 1.0, "v": 0.0}, (2.0, 3.0), 0.25)
    assert list(traj.times) == [2.0, 2.25, 2.5, 2.75, 3.0]
    with pytest.raises(ValueError):
        integrate(rhs, {"q": 1.0, "v": 0.0}, 1.0, -0.1)
    with pytest.raises(ValueError):
        integrate(rhs, {"q": 1.0, "v": 0.0}, 1.0, 0.3)
    with pytest.raises(InitialConditionError, match="misses v"):
        integrate(rhs, {"q": 1.0}, 1.0, 0.1)


def test_integration_is_deterministic():
    _, _, _, dyn, params = damped()
    rhs = compile_field(dyn.Z, params)
    a = integrate(rhs, {"q": 1.0, "v": 0.0, "s": 0.0}, 1.0, 0.01)
    b = integrate(rhs, {"q": 1.0, "v": 0.0, "s": 0.0}, 1.0, 0.01)
    assert np.array_equal(a.states, b.states)


# --------------------------------------------------------------------------
# initial conditions


def test_initial_projection_and_rejection():
    chart = cases.lagrangian_chart()
    L = P("v*s", chart)
    dyn = herglotz_el(L, herglotz_constraint(L, chart), I0=[sym("v") - ONE])
    Z = VecField(chart, {n: dyn.on_surface(dyn.Z[n]) for n in chart.coordinates})
    rhs = compile_field(Z)
    pin = InitialConstraints([sym("v") - ONE])
    traj = integrate(rhs, {"q": 0.0, "v": 1.0 + 5e-7, "s": 1.0}, 0.1, 0.1, pin)
    assert traj.states[0][chart.index("v")] == 1.0
    with pytest.raises(InitialConditionError, match="not projecting"):
        integrate(rhs, {"q": 0.0, "v": 1.01, "s": 1.0}, 0.1, 0.1, pin)


def test_initial_form_incidence_checked():
    chart, _, eta, dyn, params = damped()
    rhs = compile_field(dyn.Z, params)
    cons = InitialConstraints([], [eta] + cartan_forms(chart))
    integrate(rhs, {"q": 1.0, "v": 0.0, "s": 0.0}, 0.1, 0.1, cons)
    bad = compile_field(VecField(chart, {"t": ONE, "q": sym("v") + ONE}), params)
    with pytest.raises(InitialConditionError, match="annihilate"):
        integrate(bad, {"q": 1.0, "v": 0.0, "s": 0.0}, 0.1, 0.1, cons)


# --------------------------------------------------------------------------
# monitors


def test_constraint_drift_small_and_fourth_order():
    chart, _, eta, dyn, params = damped()
    rhs = compile_field(dyn.Z, params)
    traj = integrate(rhs, {"q": 1.0, "v": 0.0, "s": 0.0}, 10.0, 1e-3)
    report = monitor(traj, MonitorSpec(params=params).add("eta", eta))
    assert report["eta"] < 1e-8
    drifts = []
    for h in (0.2, 0.1, 0.05, 0.025):
        tr = integrate(rhs, {"q": 1.0, "v": 0.0, "s": 0.0}, 10.0, h)
        drifts.append(np.max(np.abs(form_drift(tr, eta, params))))
    for a, b in zip(drifts, drifts[1:]):
        assert 16 * 0.8 <= a / b <= 16 * 1.2


def test_drift_of_exact_differential_is_endpoint_difference():
    _, _, dyn = harmonic()
    traj = integrate(compile_field(dyn.Z), {"q": 1.0, "v": 0.0}, 1.0, 0.1)
    chart = traj.chart
    d = form_drift(traj, parse_form("dq", chart))
    assert np.allclose(d, traj.column("q") - 1.0, atol=1e-14)


def test_dissipation_channel_conservative():
    chart, L, dyn = harmonic()
    sigma = split_transversal(cases.lagrangian_problem(L, chart).omega,
                              VecField.basis(chart, "t")).sigma_t
    traj = integrate(compile_field(dyn.Z), {"q": 1.0, "v": 0.0}, 10.0, 1e-2)
    spec = MonitorSpec().add("i_Z_sigma_t", iota(dyn.Z, sigma))
    spec.add("energy", lagrangian_energy(L, chart))
    rep = monitor(traj, spec)
    assert rep["i_Z_sigma_t"] < 1e-12
    e = traj.monitors["energy"]
    assert np.max(np.abs(e - e[0])) < 1e-9 * 1e3  # h = 1e-2 here
    traj = integrate(compile_field(dyn.Z), {"q": 1.0, "v": 0.0}, 10.0, 1e-3)
    e = monitor(traj, MonitorSpec().add("E", lagrangian_energy(L, chart))) and traj.monitors["E"]
    assert np.max(np.abs(e - e[0])) < 1e-9


def test_undamped_energy_constant():
    chart, L, eta, dyn, params = damped(0.0)
    traj = integrate(compile_field(dyn.Z, params), {"q": 1.0, "v": 0.0, "s": 0.0}, 10.0, 1e-3)
    e = monitor(traj, MonitorSpec(params=params).add("E", lagrangian_energy(L, chart)))
    series = traj.monitors["E"]
    assert e["E"] > 0 and np.max(np.abs(series - series[0])) < 1e-9


def test_monitor_rejects_two_forms():
    _, _, dyn = harmonic()
    traj = integrate(compile_field(dyn.Z), {"q": 1.0, "v": 0.0}, 0.1, 0.1)
    with pytest.raises(TypeError):
        monitor(traj, MonitorSpec().add("bad", parse_form("dq^dv", traj.chart)))


# --------------------------------------------------------------------------
# export


def test_csv_export_format():
    chart, L, dyn = harmonic()
    traj = integrate(compile_field(dyn.Z), {"q": 1.0, "v": 0.0}, 0.2, 0.1)
    monitor(traj, MonitorSpec().add("energy", lagrangian_energy(L, chart)))
    buf = io.StringIO()
    traj.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,q,v,energy"
    assert len(lines) == 4
    row = lines[2].split(",")
    assert float(row[0]) == 0.1
    assert float(row[1]) == traj.states[1][1]
    assert all(float(x) == traj.states[2][i] for i, x in enumerate(lines[3].split(",")[:3]))
    assert lines[1] == "0,1,0,0.5"


def test_csv_roundtrip_exact(tmp_path):
    _, _, _, dyn, params = damped()
    traj = integrate(compile_field(dyn.Z, params), {"q": 1.0, "v": 0.0, "s": 0.0}, 1.0, 0.1)
    path = tmp_path / "out.csv"
    traj.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data, traj.states)


def test_vertical_problem_fixture():
    assert cases.V is V
