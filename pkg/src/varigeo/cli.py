"""Command-line front door: ``varigeo {derive|classify|integrate|verify} FILE``.

Problem files are TOML. Reports are JSON with sorted keys, so identical input
gives byte-identical output. Exit codes: 0 success, 2 parse or chart error,
3 failed hypothesis, 4 undecided rank, 5 inconsistent dynamics, 6 gauge
freedom without pinning, 7 failed verification, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from varigeo import eomsolve as eom
from varigeo import simulate as sim
from varigeo.errors import (
    ChartError,
    GaugeRequiresPinning,
    HypothesisError,
    ProblemFileError,
    VarigeoError,
    VerificationFailed,
)
from varigeo.excalc import Chart, DiffForm, VecField, ext_d, iota, parse_form, wedge
from varigeo.geomech import (
    ConstraintSet,
    GVProblem,
    VariationClass,
    absorb_mixed,
    cartan_forms,
    classify,
    coorientation,
    default_action_reebs,
    herglotz_constraint,
    lagrangian_energy,
    modified_precosymplectic,
    omega_bar_mixed,
    omega_bar_nonholonomic,
    poincare_cartan,
    split_transversal,
    tau,
    wedge_power,
)
from varigeo.symexpr import ZERO, Verdict, parse_expr, sym, zero_test_config

DEFAULT_SEED = 20240917
DEFAULT_TRIALS = 8

STAGES = (
    "poincare_cartan", "hamiltonian", "cocontact_constraint", "herglotz_constraint", "omega",
    "omega_bar", "modified", "derive", "herglotz_el", "transversality", "absorb", "classify",
)
CHECKS = ("all_fields", "nonholonomic", "transversality", "absorption", "herglotz_el")


# --------------------------------------------------------------------------
# problem files


@dataclass
class ProblemFile:
    path: str
    chart: Chart
    param_values: dict
    lagrangian: object = None
    hamiltonian: object = None
    omega_text: str | None = None
    I0: list = field(default_factory=list)
    I1nh: list = field(default_factory=list)
    vakonomic: list = field(default_factory=list)
    variation: VariationClass = VariationClass.VERTICAL
    pipeline: list = field(default_factory=list)
    reeb: list | None = None
    gauge: dict = field(default_factory=dict)
    integrate: dict = field(default_factory=dict)
    monitors: list = field(default_factory=list)
    custom_monitors: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    corrupt: bool = False
    raw: dict = field(default_factory=dict)


def _need(table, key, where):
    if key not in table:
        raise ProblemFileError(f"missing key {key!r} in [{where}]")
    return table[key]


def _str_list(value, where):
    if isinstance(value, str):
        return [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ProblemFileError(f"{where} must be a list of strings")
    return list(value)


def load_problem(path) -> ProblemFile:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror}") from exc
    return parse_problem(raw, str(path))


def parse_problem(raw: dict, path="<problem>") -> ProblemFile:
    chart_t = _need(raw, "chart", "top level")
    coords = _need(chart_t, "coordinates", "chart")
    spec = []
    for item in coords:
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item)):
            raise ProblemFileError("chart.coordinates entries must be [name, role] pairs")
        spec.append((item[0], item[1]))
    params = chart_t.get("parameters", {})
    if isinstance(params, list):
        params = {p: None for p in params}
    if not isinstance(params, dict):
        raise ProblemFileError("chart.parameters must be a table name = value or a list of names")
    for k, v in params.items():
        if v is not None and not isinstance(v, (int, float)):
            raise ProblemFileError(f"parameter {k} must have a numeric value")
    functions = chart_t.get("functions", {})
    if not isinstance(functions, dict):
        raise ProblemFileError("chart.functions must be a table name = [arguments]")
    chart = Chart.build(spec, tuple(params), {k: tuple(v) for k, v in functions.items()})

    prob = raw.get("problem", {})
    pf = ProblemFile(path, chart, {k: v for k, v in params.items() if v is not None}, raw=raw)
    if "lagrangian" in prob and "hamiltonian" in prob:
        raise ProblemFileError("give either a lagrangian or a hamiltonian, not both")
    if "lagrangian" in prob:
        pf.lagrangian = parse_expr(prob["lagrangian"], chart)
    if "hamiltonian" in prob:
        pf.hamiltonian = parse_expr(prob["hamiltonian"], chart)
    pf.omega_text = prob.get("omega")
    try:
        pf.variation = VariationClass.parse(prob.get("variation", "Vertical"))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc
    pf.pipeline = _str_list(prob.get("pipeline", []), "problem.pipeline") or _default_pipeline(pf)
    for s in pf.pipeline:
        if s not in STAGES:
            raise ProblemFileError(f"unknown pipeline stage {s!r}; known: {', '.join(STAGES)}")
    if "reeb" in prob:
        pf.reeb = _str_list(prob["reeb"], "problem.reeb")
    pf.corrupt = bool(prob.get("corrupt", False))

    cons = raw.get("constraints", {})
    pf.I0 = [parse_expr(s, chart) for s in _str_list(cons.get("I0", []), "constraints.I0")]
    pf.I1nh = [parse_form(s, chart, 1) for s in _str_list(cons.get("I1nh", []), "constraints.I1nh")]
    vak = cons.get("vakonomic", "auto" if pf.lagrangian is not None else [])
    if vak == "auto" or vak is True:
        pf.vakonomic = cartan_forms(chart) if chart.time is not None else []
    elif vak is False:
        pf.vakonomic = []
    else:
        pf.vakonomic = [parse_form(s, chart, 1) for s in _str_list(vak, "constraints.vakonomic")]

    gauge = raw.get("gauge", {})
    for k, v in gauge.items():
        if k not in chart.coordinates:
            raise ProblemFileError(f"gauge pins unknown coordinate {k!r}")
        pf.gauge[k] = parse_expr(str(v), chart)
    pf.integrate = dict(raw.get("integrate", {}))
    mon = raw.get("monitors", {})
    pf.monitors = _str_list(mon.get("builtin", ["constraints", "dissipation"]), "monitors.builtin")
    pf.custom_monitors = {k: parse_expr(v, chart) for k, v in mon.get("custom", {}).items()}
    ver = raw.get("verify", {})
    pf.checks = _str_list(ver.get("checks", []), "verify.checks")
    for c in pf.checks:
        if c not in CHECKS:
            raise ProblemFileError(f"unknown check {c!r}; known: {', '.join(CHECKS)}")
    return pf


def _default_pipeline(pf):
    actions = pf.chart.with_role("action")
    if pf.lagrangian is not None:
        if actions:
            return ["herglotz_constraint", "omega_bar", "derive"]
        return ["poincare_cartan", "derive"]
    if pf.hamiltonian is not None:
        if actions:
            return ["hamiltonian", "cocontact_constraint", "omega_bar", "derive"]
        return ["hamiltonian", "derive"]
    if pf.omega_text is not None:
        return ["omega", "derive"]
    raise ProblemFileError("problem needs a lagrangian, a hamiltonian or an omega")


# --------------------------------------------------------------------------
# pipeline


class Session:
    """Mutable state threaded through the pipeline stages."""

    def __init__(self, pf: ProblemFile):
        self.pf = pf
        self.chart = pf.chart
        self.omega = None
        self.I1nh = list(pf.I1nh)
        self.dynamics = None
        self.report = {"stages": []}

    # -- helpers

    def L(self):
        if self.pf.lagrangian is None:
            raise ProblemFileError("this stage needs a lagrangian")
        return self.pf.lagrangian

    def H(self):
        if self.pf.hamiltonian is None:
            raise ProblemFileError("this stage needs a hamiltonian")
        return self.pf.hamiltonian

    def gauge_I0(self):
        return [sym(k) - v for k, v in self.pf.gauge.items()]

    def constraints(self, extra_I0=()):
        return ConstraintSet(list(self.pf.I0) + list(extra_I0), list(self.I1nh),
                             list(self.pf.vakonomic))

    def problem(self, omega=None, variation=None, extra_I0=()):
        om = omega if omega is not None else self.omega
        if om is None:
            raise ProblemFileError("no 2-form built before this stage")
        return GVProblem(self.chart, om, self.constraints(extra_I0),
                         variation or self.pf.variation, self.pf.path)

    def record(self, stage, **out):
        entry = {"stage": stage}
        entry.update(out)
        self.report["stages"].append(entry)

    def reebs(self):
        if self.pf.reeb is not None:
            return [VecField.basis(self.chart, n) for n in self.pf.reeb]
        if self.pf.lagrangian is not None:
            return default_action_reebs(self.L(), self.I1nh, self.chart)
        return [VecField.basis(self.chart, s) for s in self.chart.with_role("action")]

    def pairs(self):
        qs = self.chart.with_role("position")
        ps = self.chart.with_role("momentum")
        if len(qs) != len(ps):
            raise ChartError("hamiltonian charts need one momentum per position")
        return list(zip(qs, ps))

    # -- stages

    def st_poincare_cartan(self):
        self.omega = ext_d(poincare_cartan(self.L(), self.chart))
        self.record("poincare_cartan", omega=str(self.omega))

    def st_hamiltonian(self):
        c = self.chart
        om = wedge(ext_d(self.H(), c), tau(c))
        for q, p in self.pairs():
            om = om - wedge(DiffForm.differential(c, p), DiffForm.differential(c, q))
        self.omega = om
        self.record("hamiltonian", omega=str(om))

    def st_cocontact_constraint(self):
        c = self.chart
        actions = c.with_role("action")
        if len(actions) != 1:
            raise ChartError("the cocontact constraint needs exactly one action coordinate")
        eta = tau(c) * self.H() + DiffForm.differential(c, actions[0])
        for q, p in self.pairs():
            eta = eta - DiffForm.differential(c, q) * sym(p)
        self.I1nh.append(eta)
        self.record("cocontact_constraint", eta=str(eta))

    def st_herglotz_constraint(self):
        eta = herglotz_constraint(self.L(), self.chart)
        self.I1nh.append(eta)
        self.record("herglotz_constraint", eta=str(eta))

    def st_omega(self):
        if self.pf.omega_text is None:
            raise ProblemFileError("stage 'omega' needs problem.omega")
        self.omega = parse_form(self.pf.omega_text, self.chart, 2)
        self.record("omega", omega=str(self.omega))

    def _omega_bar(self, sign=1):
        verdict, top = coorientation(self.I1nh, self.chart)
        if verdict is Verdict.ZERO:
            raise HypothesisError(f"co-orientation fails: {top} = 0")
        R = self.reebs()
        if self.pf.lagrangian is not None and self.pf.vakonomic and (
                self.omega is None or self.omega == ext_d(poincare_cartan(self.L(), self.chart))):
            ob = omega_bar_mixed(self.L(), self.I1nh, R, self.chart)
            if sign < 0:
                dth = ext_d(poincare_cartan(self.L(), self.chart))
                ob = dth - (ob - dth)
            return ob, R
        if self.omega is None:
            raise ProblemFileError("stage 'omega_bar' needs a 2-form built earlier")
        ob = omega_bar_nonholonomic(self.omega, self.I1nh, R)
        if sign < 0:
            ob = self.omega - (ob - self.omega)
        return ob, R

    def st_omega_bar(self):
        base = self.omega
        ob, R = self._omega_bar(-1 if self.pf.corrupt else 1)
        if base is None:
            self.base_omega = ext_d(poincare_cartan(self.L(), self.chart))
        else:
            self.base_omega = base
        self.omega = ob
        self.record("omega_bar", omega_bar=str(ob), reeb_fields=[str(r) for r in R],
                    corrupted=self.pf.corrupt)

    def st_modified(self):
        split = modified_precosymplectic(self.L(), self.chart)
        self.omega = split.omega + wedge(split.sigma_t, tau(self.chart))
        i_rt = iota(split.R_t, split.omega)
        self.record("modified", omega=str(split.omega), sigma_t=str(split.sigma_t),
                    reeb=str(split.R_t), i_reeb_omega=str(i_rt), total=str(self.omega))

    def _finish_dynamics(self, dyn, stage):
        self.dynamics = dyn
        out = dyn.to_dict()
        if dyn.Z is not None and dyn.verdict is not eom.Verdict4.INCONSISTENT:
            out["i_Z_sigma_t"] = self.dissipation(dyn).text
        self.record(stage, dynamics=out)

    def st_derive(self, extra_I0=()):
        self._finish_dynamics(eom.derive_dynamics(self.problem(extra_I0=extra_I0)), "derive")

    def st_herglotz_el(self, extra_I0=()):
        L = self.L()
        eta = herglotz_constraint(L, self.chart)
        if eta not in self.I1nh:
            self.I1nh.append(eta)
        dyn = eom.herglotz_el(L, eta, self.chart, list(self.pf.I0) + list(extra_I0))
        self._finish_dynamics(dyn, "herglotz_el")

    def st_transversality(self):
        if self.omega is None:
            raise ProblemFileError("stage 'transversality' needs a 2-form built earlier")
        split = split_transversal(self.omega, VecField.basis(self.chart, self.chart.require_time()))
        red = eom.check_transversality_reduction(split.omega, split.sigma_t, split.R_t,
                                                 self.constraints().forms())
        self.record("transversality", omega=str(split.omega), sigma_t=str(split.sigma_t),
                    reduction=red.to_dict())
        return red

    def st_absorb(self):
        L = self.L()
        ab = absorb_mixed(L, self.I1nh, self.chart)
        ext = eom.derive_dynamics(GVProblem(ab.chart, ab.omega_U, ConstraintSet(),
                                            VariationClass.ALL_FIELDS, "absorbed"))
        out = {"chart": ab.chart.to_dict(), "omega_U": str(ab.omega_U), "dynamics": ext.to_dict()}
        base = self.dynamics or eom.derive_dynamics(self.problem())
        shift = [ab.momenta[s] for s in self.chart.with_role("action") if s in ab.momenta]
        cmp = eom.project_and_compare(ext, base, ab.projection, shift)
        out["projection"] = {k: v for k, v in cmp.to_dict().items()
                             if k in ("verdict", "reason", "projected_Z", "constant_shift")}
        if ab.omega_check is not None:
            chk = eom.derive_dynamics(GVProblem(ab.chart, ab.omega_check, ConstraintSet(),
                                                VariationClass.ALL_FIELDS, "absorbed (lcs form)"))
            cmp2 = eom.project_and_compare(chk, base, ab.projection, shift)
            out["omega_check"] = str(ab.omega_check)
            out["eta_check"] = str(ab.eta_check)
            out["lcs_projection"] = {k: v for k, v in cmp2.to_dict().items()
                                     if k in ("verdict", "reason", "projected_Z", "constant_shift")}
            cmp = cmp if not cmp.passed else cmp2
        self.record("absorb", **out)
        return cmp

    def st_classify(self):
        if self.pf.lagrangian is not None:
            rep = classify(self.L(), self.chart)
            out = rep.to_dict()
            out["summary"] = classification_summary(rep)
        else:
            out = hamiltonian_structure(self)
        self.record("classify", **out)

    # -- derived quantities

    def dissipation(self, dyn):
        """``i_Z sigma_t`` with ``sigma_t = i_{d/dt} Omega`` on the solution surface."""
        om = self.omega
        if om is None:
            return ZERO
        split = split_transversal(om, VecField.basis(self.chart, self.chart.require_time()))
        val = iota(dyn.Z, split.sigma_t)
        if isinstance(val, DiffForm):
            val = ZERO
        return dyn.on_surface(val)

    def run(self, stages):
        for s in stages:
            getattr(self, "st_" + s)()


def classification_summary(rep):
    def word(flag):
        if flag.holds is None:
            return "undecided"
        return "yes" if flag.holds else "no"

    out = {}
    f = rep.flags
    if "hessian_regular" in f:
        out["regular"] = word(f["hessian_regular"])
    if "cosymplectic" in f:
        out["cosymplectic"] = word(f["cosymplectic"])
    if "precosymplectic_reeb" in f:
        out["(omega_L, tau) Reeb"] = "exists" if f["precosymplectic_reeb"].holds else "nonexistent"
    if "contact" in f:
        out["contact"] = word(f["contact"])
    if "contact_reeb" in f:
        out["eta_L"] = "Reeb exists" if f["contact_reeb"].holds else "Reeb nonexistent"
    if "precontact" in f:
        p = f["precontact"]
        out["precontact"] = "holds" if p.holds else (
            "fails (see discrepancy note)" if rep.notes else "fails")
    if "premulticontact" in f:
        d = f["premulticontact"].detail
        sr = d.get("surface_reeb", {})
        out["surface Reeb"] = sr.get("particular", "nonexistent")
        out["tangency pre-check"] = "feasible" if d["tangency_precheck"]["feasible"] else "infeasible"
    if "lcs" in f:
        out["lcs"] = word(f["lcs"])
    return out


def hamiltonian_structure(sess):
    c = sess.chart
    pairs = sess.pairs()
    om = DiffForm.zero(c, 2)
    for q, p in pairs:
        om = om + wedge(DiffForm.differential(c, q), DiffForm.differential(c, p))
    actions = c.with_role("action")
    out = {}
    if actions:
        eta = DiffForm.differential(c, actions[0])
        for q, p in pairs:
            eta = eta - DiffForm.differential(c, q) * sym(p)
        top = wedge(tau(c), wedge(eta, wedge_power(ext_d(eta), len(pairs))))
        out["cocontact"] = {"holds": not top.is_zero, "witness": f"tau^eta^(d eta)^n = {top}"}
    else:
        top = wedge(tau(c), wedge_power(om, len(pairs)))
        out["cosymplectic"] = {"holds": not top.is_zero, "witness": f"tau^omega^n = {top}"}
    return {"flags": out, "notes": []}


# --------------------------------------------------------------------------
# commands


def _base(cmd, pf, args):
    return {
        "command": cmd,
        "problem": {
            "file": Path(pf.path).name,
            "chart": pf.chart.to_dict(),
            "lagrangian": pf.lagrangian.text if pf.lagrangian is not None else None,
            "hamiltonian": pf.hamiltonian.text if pf.hamiltonian is not None else None,
            "variation": str(pf.variation),
            "pipeline": list(pf.pipeline),
        },
        "zero_test": {"seed": args.seed, "trials": args.trials},
    }


def cmd_derive(pf, args):
    sess = Session(pf)
    sess.run(pf.pipeline)
    rep = _base("derive", pf, args)
    rep.update(sess.report)
    code = 0
    if sess.dynamics is not None:
        rep["verdict"] = str(sess.dynamics.verdict)
        if sess.dynamics.verdict is eom.Verdict4.INCONSISTENT:
            code = 5
    return rep, code


def cmd_classify(pf, args):
    sess = Session(pf)
    sess.st_classify()
    rep = _base("classify", pf, args)
    rep.update(sess.report)
    return rep, 0


def cmd_integrate(pf, args):
    sess = Session(pf)
    stages = [s for s in pf.pipeline if s not in ("absorb", "classify", "transversality")]
    solve = [s for s in stages if s in ("derive", "herglotz_el")]
    if not solve:
        raise ProblemFileError("integrate needs a 'derive' or 'herglotz_el' stage")
    pins = sess.gauge_I0()
    for s in stages:
        if s in ("derive", "herglotz_el"):
            getattr(sess, "st_" + s)(extra_I0=pins)
        else:
            getattr(sess, "st_" + s)()
    dyn = sess.dynamics
    rep = _base("integrate", pf, args)
    rep.update(sess.report)
    if dyn.verdict is eom.Verdict4.INCONSISTENT:
        rep["verdict"] = str(dyn.verdict)
        return rep, 5
    if dyn.kernel:
        raise GaugeRequiresPinning(
            "gauge freedom requires pinning: kernel "
            + ", ".join(str(k) for k in dyn.kernel) + "; add a [gauge] table")
    if dyn.unresolved:
        raise HypothesisError("dynamics still carry unresolved conditions: "
                              + ", ".join(c.text for c in dyn.unresolved))
    settings = pf.integrate
    x0 = _need(settings, "x0", "integrate")
    span = _need(settings, "span", "integrate")
    h = float(_need(settings, "step", "integrate"))
    params = dict(pf.param_values)
    missing = [p for p in pf.chart.parameters if p not in params]
    if missing:
        raise ProblemFileError("integration needs numeric values for " + ", ".join(missing))
    rhs = sim.compile_field(dyn.Z, params)
    surface = [c for c in dyn.secondary] + list(pf.I0) + pins
    forms = sess.constraints().forms()
    x0 = {k: float(v) for k, v in x0.items()}
    for k, v in dyn.substitutions.items():
        if k not in x0:
            point = dict(x0)
            point.update(params)
            x0[k] = v.eval(point)
    traj = sim.integrate(rhs, x0, span, h, sim.InitialConstraints(surface, forms))
    spec = sim.MonitorSpec(params=params)
    names = []
    for m in pf.monitors:
        if m == "constraints":
            for k, a in enumerate(sess.I1nh):
                spec.add(f"drift_eta{k}", a)
            for k, a in enumerate(pf.vakonomic):
                spec.add(f"drift_kappa{k}", a)
        elif m == "dissipation":
            spec.add("i_Z_sigma_t", sess.dissipation(dyn))
        elif m == "energy":
            E = lagrangian_energy(sess.L(), pf.chart) if pf.lagrangian is not None else sess.H()
            spec.add("energy", E)
        elif m == "surface":
            for k, c in enumerate(surface):
                spec.add(f"surface{k}", c)
        else:
            raise ProblemFileError(f"unknown builtin monitor {m!r}")
        names.append(m)
    for k, e in pf.custom_monitors.items():
        spec.add(k, e)
    maxima = sim.monitor(traj, spec)
    if "energy" in traj.monitors:
        e = traj.monitors["energy"]
        maxima["energy_variation"] = float(max(abs(x - e[0]) for x in e))
    csv_path = args.csv or settings.get("csv") or (Path(pf.path).stem + ".csv")
    traj.to_csv(csv_path)
    rep["verdict"] = str(dyn.verdict)
    rep["integration"] = {
        "x0": {n: float(traj.states[0][i]) for i, n in enumerate(pf.chart.coordinates)},
        "span": float(span),
        "step": h,
        "steps": len(traj.times) - 1,
        "final": {n: float(traj.states[-1][i]) for i, n in enumerate(pf.chart.coordinates)},
        "csv": str(csv_path),
        "monitor_max_abs": maxima,
        "gauge": {k: v.text for k, v in pf.gauge.items()},
    }
    return rep, 0


def cmd_verify(pf, args):
    sess = Session(pf)
    stages = [s for s in pf.pipeline if s not in ("derive", "herglotz_el", "absorb", "classify",
                                                  "transversality")]
    sess.run(stages)
    checks = pf.checks or ["all_fields"]
    results = {}
    base = getattr(sess, "base_omega", None)
    for c in checks:
        if c == "all_fields":
            r = eom.verify_equivalence(sess.problem(variation=VariationClass.VERTICAL),
                                       sess.problem(variation=VariationClass.ALL_FIELDS))
        elif c == "nonholonomic":
            if base is None:
                raise ProblemFileError("check 'nonholonomic' needs an omega_bar stage")
            r = eom.verify_equivalence(
                sess.problem(omega=base, variation=VariationClass.ADMISSIBLE_REDUCED),
                sess.problem(variation=VariationClass.VERTICAL))
        elif c == "transversality":
            red = sess.st_transversality()
            dyn = eom.derive_dynamics(sess.problem())
            ok = red.exists == (dyn.verdict is not eom.Verdict4.INCONSISTENT)
            if ok and red.exists:
                Zr = VecField.basis(sess.chart, sess.chart.require_time()) - red.X
                ok, why = eom._compare_fields(Zr, red.kernel, dyn.Z, dyn.kernel,
                                              sess.chart.coordinates, dyn.substitutions)
            else:
                why = "existence agrees" if ok else "existence differs"
            r = eom.Comparison(ok, why, {"reduction": red.to_dict(), "dynamics": dyn.to_dict()})
        elif c == "herglotz_el":
            L = sess.L()
            r = eom.compare_dynamics(eom.derive_dynamics(sess.problem()),
                                     eom.herglotz_el(L, herglotz_constraint(L, sess.chart)))
        elif c == "absorption":
            if sess.dynamics is None:
                if pf.lagrangian is not None and sess.chart.with_role("action"):
                    L = sess.L()
                    sess.dynamics = eom.herglotz_el(L, herglotz_constraint(L, sess.chart))
                else:
                    sess.dynamics = eom.derive_dynamics(sess.problem())
            r = sess.st_absorb()
            sess.report["stages"].pop()
        results[c] = {k: v for k, v in r.to_dict().items() if k in ("verdict", "reason")}
        if c == "absorption":
            results[c]["details"] = {k: v for k, v in r.details.items()
                                     if k in ("projected_Z", "constant_shift")}
            results[c]["secondary_constraints"] = r.details["extended"]["secondary_constraints"]
    rep = _base("verify", pf, args)
    rep.update(sess.report)
    rep["checks"] = results
    failed = [k for k, v in results.items() if v["verdict"] != "Pass"]
    rep["verdict"] = "Fail" if failed else "Pass"
    if failed:
        rep["error"] = {"type": "VerificationFailed", "message": "failed: " + ", ".join(failed),
                        "exit_code": VerificationFailed.exit_code}
        return rep, VerificationFailed.exit_code
    return rep, 0


COMMANDS = {"derive": cmd_derive, "classify": cmd_classify, "integrate": cmd_integrate,
            "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="varigeo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("file", help="TOML problem file")
    ap.add_argument("--out", help="write the JSON report here instead of stdout")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED,
                    help="seed of the randomized zero test (echoed in the report)")
    ap.add_argument("--trials", type=int, default=DEFAULT_TRIALS,
                    help="evaluation points per zero test")
    ap.add_argument("--csv", help="trajectory CSV path (integrate only)")
    return ap


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def run(argv=None):
    """Run a command; returns ``(report or None, exit code, error message or None)``."""
    args = build_parser().parse_args(argv)
    report = None
    try:
        with zero_test_config(seed=args.seed, trials=args.trials):
            pf = load_problem(args.file)
            report, code = COMMANDS[args.command](pf, args)
        return report, code, None
    except VarigeoError as exc:
        report = {
            "command": args.command,
            "zero_test": {"seed": args.seed, "trials": args.trials},
            "error": {"type": type(exc).__name__, "message": str(exc),
                      "exit_code": exc.exit_code},
        }
        pivot = getattr(exc, "pivot", None)
        if pivot is not None:
            report["error"]["pivot"] = pivot.text
        return report, exc.exit_code, f"varigeo: {type(exc).__name__}: {exc}"


def main(argv=None):
    report, code, err = run(argv)
    args = build_parser().parse_args(argv)
    if report is not None:
        text = dumps(report)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    if err:
        sys.stderr.write(err + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
