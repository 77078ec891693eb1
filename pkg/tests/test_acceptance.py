"""Acceptance criteria 1-10.

Each criterion prints one line ``criterion N: PASS|FAIL  <title>`` (also when
run as ``python tests/test_acceptance.py``).
"""

import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import cases  # noqa: E402
from cases import A, P, R, V  # noqa: E402
from strategies import (  # noqa: E402
    FUZZ_CHART,
    random_field,
    random_form,
    random_lagrangian,
    random_map,
)
from varigeo.eomsolve import (  # noqa: E402
    Verdict4,
    check_transversality_reduction,
    compare_dynamics,
    derive_dynamics,
    herglotz_el,
    project_and_compare,
    verify_equivalence,
)
from varigeo.excalc import (  # noqa: E402
    Chart,
    DiffForm,
    VecField,
    ext_d,
    iota,
    lie,
    pullback,
    wedge,
)
from varigeo.geomech import (  # noqa: E402
    ConstraintSet,
    GVProblem,
    absorb_holonomy,
    absorb_mixed,
    classify,
    herglotz_constraint,
    lagrangian_energy,
    lagrangian_two_form,
    lcs_defect,
    modified_precosymplectic,
    premulticontact_reeb,
    reeb_solve,
    split_transversal,
    tau,
)
from varigeo.simulate import MonitorSpec, compile_field, form_drift, integrate, monitor  # noqa: E402
from varigeo.symexpr import ONE, ZERO, sym, ufun  # noqa: E402

GAMMA = 0.2
FUZZ_CASES = 1000


# --------------------------------------------------------------------------
# 1. cocontact Hamiltonian golden field


def criterion_1():
    c = cases.cocontact()
    dyn = derive_dynamics(c.problem(c.Omega_bar, V))
    assert dyn.verdict is Verdict4.UNIQUE
    H, p = c.H, sym("p")
    X = VecField(c.chart, {
        "q": -H.diff("p"),
        "p": H.diff("q") + p * H.diff("s"),
        "s": -(p * H.diff("p") - H),
    })
    assert dyn.Z == VecField.basis(c.chart, "t") - X


# --------------------------------------------------------------------------
# 2. regular Lagrangian golden field


def criterion_2():
    chart = Chart.build([("t", "time"), ("q", "position"), ("v", "velocity")],
                        functions={"L": ("t", "q", "v")})
    L = ufun("L", chart.coordinates)
    dyn = derive_dynamics(cases.lagrangian_problem(L, chart))
    assert dyn.verdict is Verdict4.UNIQUE
    W = ONE / L.diff("v").diff("v")
    v = sym("v")
    X = VecField(chart, {"q": -v, "v": -W * (L.diff("q") - v * L.diff("q").diff("v"))})
    R_t = VecField(chart, {"t": ONE, "v": -W * L.diff("t").diff("v")})
    assert dyn.Z == R_t - X

    plain = cases.lagrangian_chart(action=False, params=())
    dyn = derive_dynamics(cases.lagrangian_problem(P("1/2*v^2 - 1/2*q^2", plain), plain))
    rhs = compile_field(dyn.Z)
    rng = random.Random(2)
    for _ in range(100):
        t, q, vv = (rng.uniform(-5, 5) for _ in range(3))
        assert list(rhs(np.array([t, q, vv]))) == [1.0, vv, -q]


# --------------------------------------------------------------------------
# 3. L = tv


def criterion_3():
    chart = cases.lagrangian_chart(action=False, params=())
    L = P("t*v", chart)
    fam = reeb_solve(chart, [(tau(chart), 1), (lagrangian_two_form(L, chart), None)])
    assert not fam.exists and fam.witness
    assert classify(L, chart)["precosymplectic_reeb"].holds is False
    split = modified_precosymplectic(L, chart)
    assert iota(VecField.basis(chart, "t"), split.omega).is_zero
    prob, _ = cases.modified_problem(L, chart)
    assert derive_dynamics(prob).verdict is Verdict4.INCONSISTENT


# --------------------------------------------------------------------------
# 4. L = vs


def criterion_4():
    chart = cases.lagrangian_chart()
    L = P("v*s", chart)
    flag = classify(L, chart)["contact_reeb"]
    assert flag.holds is False and "no solution" in flag.witness
    eta = herglotz_constraint(L, chart)
    dyn = herglotz_el(L, eta)
    assert dyn.verdict is Verdict4.GAUGE and len(dyn.kernel) == 1
    assert dyn.Z["s"] == sym("v") * sym("s")
    pinned = herglotz_el(L, eta, I0=[sym("v") - ONE])
    Z = VecField(chart, {n: pinned.on_surface(pinned.Z[n]) for n in chart.coordinates})
    s0 = 1.0
    traj = integrate(compile_field(Z), {"q": 0.0, "v": 1.0, "s": s0}, 10.0, 1e-3)
    assert abs(traj.column("s")[-1] / (s0 * math.exp(10)) - 1) < 1e-5


# --------------------------------------------------------------------------
# 5. L = s v^a + v^b


def criterion_5():
    chart = Chart.build([("t", "time"), ("qa", "position"), ("qb", "position"),
                         ("va", "velocity"), ("vb", "velocity"), ("s", "action")])
    pm = premulticontact_reeb(P("s*va + vb", chart), chart)
    assert pm.tangency["feasible"] is False
    surf = pm.surface_eta.chart
    assert pm.surface_reeb.exists
    assert pm.surface_reeb.particular == VecField(surf, {"qb": -ONE})
    # the untruncated solve on the surface form gives the same particular field
    fam = reeb_solve(surf, [(pm.surface_eta, 1), (ext_d(pm.surface_eta), None)])
    assert fam.exists and fam.particular == VecField(surf, {"qb": -ONE})


# --------------------------------------------------------------------------
# 6. equivalence theorems


def criterion_6():
    chart, _, Omega = cases.cosymplectic_hamiltonian()
    p = GVProblem(chart, Omega, ConstraintSet(), V)
    assert verify_equivalence(p, p.with_variation(A)).passed

    c = cases.cocontact()
    assert verify_equivalence(c.problem(c.Omega, R), c.problem(c.Omega_bar, V)).passed
    assert verify_equivalence(c.problem(c.Omega_bar, V), c.problem(c.Omega_bar, A)).passed
    split = split_transversal(c.Omega_bar, VecField.basis(c.chart, "t"))
    red = check_transversality_reduction(split.omega, split.sigma_t, split.R_t, [c.eta])
    dyn = derive_dynamics(c.problem(c.Omega_bar, V))
    assert red.exists and split.R_t - red.X == dyn.Z

    lc = cases.lagrangian_chart()
    L = P("1/2*v^2 - 1/2*q^2 - g*s", lc)
    base, bar = cases.herglotz_pair(L, lc)
    assert verify_equivalence(base, bar).passed
    assert compare_dynamics(derive_dynamics(bar),
                            herglotz_el(L, herglotz_constraint(L, lc))).passed

    fc = cases.lagrangian_chart(action=False, params=())
    Lf = P("1/2*v^2", fc)
    ab = absorb_holonomy(Lf, fc)
    ext = derive_dynamics(GVProblem(ab.chart, ab.omega_U, ConstraintSet(), A))
    assert [s.text for s in ext.secondary] == ["p - v"]
    assert project_and_compare(ext, derive_dynamics(cases.lagrangian_problem(Lf, fc)),
                               ab.projection).passed

    eta = herglotz_constraint(L, lc)
    ab = absorb_mixed(L, [eta], lc)
    base_dyn = herglotz_el(L, eta)
    for omega in (ab.omega_U, ab.omega_check):
        ext = derive_dynamics(GVProblem(ab.chart, omega, ConstraintSet(), A))
        cmp = project_and_compare(ext, base_dyn, ab.projection, ["p_s"])
        assert cmp.passed, cmp.reason
        assert cmp.details["constant_shift"][0]["passed"]


# --------------------------------------------------------------------------
# 7. algebra properties


def criterion_7():
    rng = random.Random(7)
    counts = dict.fromkeys(["d2", "cartan", "graded", "pullback"], 0)
    for _ in range(FUZZ_CASES):
        a = random_form(rng, FUZZ_CHART, rng.randint(1, 3), rational=True, functions=True)
        f = random_form(rng, FUZZ_CHART, 0, rational=True, functions=True)
        assert ext_d(ext_d(a)).is_zero
        assert ext_d(ext_d(f, FUZZ_CHART)).is_zero
        counts["d2"] += 1

        X = random_field(rng, FUZZ_CHART, rational=True)
        assert (lie(X, a) - iota(X, ext_d(a)) - ext_d(iota(X, a), FUZZ_CHART)).is_zero
        counts["cartan"] += 1

        p, q = rng.randint(1, 2), rng.randint(1, 2)
        b = random_form(rng, FUZZ_CHART, p, functions=True)
        c = random_form(rng, FUZZ_CHART, q, functions=True)
        sign = -1 if (p * q) % 2 else 1
        assert (wedge(b, c) - wedge(c, b) * sign).is_zero
        counts["graded"] += 1

        m = random_map(rng)
        e = random_form(rng, FUZZ_CHART, rng.randint(0, 2))
        de = ext_d(e) if isinstance(e, DiffForm) else ext_d(e, FUZZ_CHART)
        assert (pullback(m, de) - ext_d(pullback(m, e), m.source)).is_zero
        counts["pullback"] += 1
    assert all(n >= 1000 for n in counts.values())


# --------------------------------------------------------------------------
# 8. invariants along the flow


def _integrated_unique_cases():
    """(problem, dynamics, params, x0, constraint forms) for integrable Unique dynamics."""
    out = []
    hc = cases.lagrangian_chart(action=False, params=())
    prob = cases.lagrangian_problem(P("1/2*v^2 - 1/2*q^2", hc), hc)
    out.append((prob, derive_dynamics(prob), {}, {"q": 1.0, "v": 0.0}))
    lc = cases.lagrangian_chart()
    _, bar = cases.herglotz_pair(P("1/2*v^2 - 1/2*q^2 - g*s", lc), lc)
    out.append((bar, derive_dynamics(bar), {"g": GAMMA}, {"q": 1.0, "v": 0.0, "s": 0.0}))
    cc = Chart.build([("t", "time"), ("q", "position"), ("p", "momentum"), ("s", "action")],
                     parameters=["g"])
    H = P("1/2*p^2 + 1/2*q^2 + g*s", cc)
    eta = tau(cc) * H + cases.parse_form("ds - p*dq", cc)
    Omega = wedge(ext_d(H, cc), tau(cc)) - cases.parse_form("dp^dq", cc)
    from varigeo.geomech import omega_bar_nonholonomic
    Ob = omega_bar_nonholonomic(Omega, [eta], [VecField.basis(cc, "s")])
    prob = GVProblem(cc, Ob, ConstraintSet(I1nh=[eta]), V)
    out.append((prob, derive_dynamics(prob), {"g": GAMMA}, {"q": 1.0, "p": 0.0, "s": 0.0}))
    return out


def criterion_8():
    for prob, dyn, params, x0 in _integrated_unique_cases():
        assert dyn.verdict is Verdict4.UNIQUE
        sigma = split_transversal(prob.omega, VecField.basis(prob.chart, "t")).sigma_t
        rhs = compile_field(dyn.Z, params)
        traj = integrate(rhs, x0, 10.0, 1e-2)
        spec = MonitorSpec(params=params).add("i_Z_sigma_t", iota(dyn.Z, sigma))
        for k, alpha in enumerate(prob.constraints.forms()):
            spec.add(f"drift{k}", alpha)
        rep = monitor(traj, spec)
        assert rep["i_Z_sigma_t"] < 1e-10
        # drift order under halving, on the first constraint form
        alpha = prob.constraints.forms()[0]
        drifts = []
        for h in (0.2, 0.1, 0.05):
            tr = integrate(rhs, x0, 10.0, h)
            drifts.append(float(np.max(np.abs(form_drift(tr, alpha, params)))))
        if drifts[-1] < 1e-13:
            # the form is exactly preserved by RK4 (linear in the state): nothing to rate
            continue
        for a, b in zip(drifts, drifts[1:]):
            assert 16 * 0.8 <= a / b <= 16 * 1.2, drifts


# --------------------------------------------------------------------------
# 9. dissipation law of the damped contact oscillator


def criterion_9():
    chart = cases.lagrangian_chart()
    L = P("1/2*v^2 - 1/2*q^2 - g*s", chart)
    eta = herglotz_constraint(L, chart)
    dyn = herglotz_el(L, eta)
    params = {"g": GAMMA}
    traj = integrate(compile_field(dyn.Z, params), {"q": 1.0, "v": 0.0, "s": 0.0}, 10.0, 1e-3)
    g, v = sym("g"), sym("v")
    E = P("1/2*v^2 + 1/2*q^2", chart)
    # pointwise balance dE/dt + g v^2 evaluated along the trajectory
    balance = dyn.Z(E) + g * v * v
    # integrated balance E(t) - E(0) + g int v^2 dt, as the drift of dE + g v^2 dt
    integrated = ext_d(E, chart) + tau(chart) * (g * v * v)
    # the Lagrangian energy obeys dE_L/dt = -g E_L
    E_L = lagrangian_energy(L, chart)
    E_L_law = ext_d(E_L, chart) + tau(chart) * (g * E_L)
    rep = monitor(traj, MonitorSpec(params=params).add("balance", balance)
                  .add("integrated", integrated).add("E_L_law", E_L_law))
    assert rep["balance"] < 1e-8 and rep["integrated"] < 1e-8 and rep["E_L_law"] < 1e-8
    w = math.sqrt(1 - GAMMA**2 / 4)
    t = traj.times
    q, vv = traj.column("q"), traj.column("v")
    ref = np.exp(-GAMMA * t / 2) * (np.cos(w * t) + GAMMA / (2 * w) * np.sin(w * t))
    assert np.max(np.abs(q - ref)) < 1e-4
    amplitude = np.sqrt(q**2 + ((vv + GAMMA * q / 2) / w) ** 2)
    A0 = math.sqrt(1 + (GAMMA / (2 * w)) ** 2)
    assert np.max(np.abs(amplitude - A0 * np.exp(-GAMMA * t / 2))) < 1e-4


# --------------------------------------------------------------------------
# 10. lcs structure of the absorbed Herglotz form


def criterion_10():
    rng = random.Random(10)
    chart = cases.lagrangian_chart(params=())
    n = 0
    while n < 20:
        L = random_lagrangian(rng, chart)
        if "s" not in L.free:
            continue
        ab = absorb_mixed(L, [herglotz_constraint(L, chart)], chart)
        assert lcs_defect(ab).is_zero
        assert lie(ab.lee, ab.omega_check).is_zero
        n += 1


CRITERIA = [
    (1, "cocontact Hamiltonian golden field", criterion_1),
    (2, "regular Lagrangian golden field", criterion_2),
    (3, "L = tv: no Reeb field, modified structure, inconsistent dynamics", criterion_3),
    (4, "L = vs: no contact Reeb field, gauge dynamics, pinned s = s0 e^t", criterion_4),
    (5, "L = s va + vb: infeasible pre-check, surface Reeb -d/dqb", criterion_5),
    (6, "equivalence theorems and absorption", criterion_6),
    (7, f"algebra identities on {FUZZ_CASES} fuzzed instances each", criterion_7),
    (8, "i_Z sigma_t and fourth-order constraint drift along flows", criterion_8),
    (9, "dissipation law and damped envelope", criterion_9),
    (10, "lcs identities of the absorbed form for 20 fuzzed L", criterion_10),
]


def _run(n, title, fn):
    start = time.perf_counter()
    try:
        fn()
        ok, why = True, ""
    except AssertionError as exc:
        ok, why = False, f" ({exc})" if str(exc) else " (assertion failed)"
    dt = time.perf_counter() - start
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{dt:.1f}s]{why}"
    return ok, line


@pytest.mark.parametrize("n, title, fn", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(n, title, fn, capsys):
    ok, line = _run(n, title, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_run(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
