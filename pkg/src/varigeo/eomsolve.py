"""Equations of motion of geometric variational problems.

A problem ``(Omega, J, Adm)`` on a chart with time ``t`` is solved for a vector
field ``Z`` with ``i_Z dt = 1``, ``i_Z alpha = 0`` for every constraint form and
``i_xi i_Z Omega = 0`` for every admissible variation ``xi``. The system is
linear in the components of ``Z`` and is eliminated symbolically. Residual rows
that reduce to nonconstant functions become secondary constraints; one
propagation pass substitutes them and adds their tangency rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from varigeo.errors import ChartError, VarigeoError
from varigeo.excalc import (
    CoordMap,
    DiffForm,
    VecField,
    contraction_rows,
    ext_d,
    iota,
    normalize_function,
    solve_linear,
)
from varigeo.geomech import lagrangian as lag
from varigeo.geomech.problem import GVProblem, VariationClass
from varigeo.symexpr import ZERO, Expr, Verdict, const, is_zero, sym


class Verdict4(enum.Enum):
    UNIQUE = "Unique"
    GAUGE = "Gauge"
    CONSTRAINED_SURFACE = "ConstrainedSurface"
    INCONSISTENT = "Inconsistent"

    def __str__(self):
        return self.value


# preference when solving a secondary constraint for one coordinate
_SOLVE_ORDER = ("momentum", "action_momentum", "velocity", "auxiliary", "action", "position")


@dataclass
class System:
    """Linear rows ``sum_k row[k] Z^k = rhs`` with labels, on ``chart``."""

    chart: object
    unknowns: list
    matrix: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def add(self, row, rhs, label):
        self.matrix.append(list(row))
        self.rhs.append(rhs if isinstance(rhs, Expr) else const(rhs))
        self.labels.append(label)

    def add_contraction(self, form, target, name, skip=()):
        for row, tgt, lab in contraction_rows(form, target, self.unknowns):
            if lab in skip:
                continue
            comp = "^".join("d" + n for n in lab) if lab else "scalar"
            self.add(row, tgt, f"{name}, {comp} component")

    def subs(self, mapping):
        out = System(self.chart, self.unknowns)
        for row, r, lab in zip(self.matrix, self.rhs, self.labels):
            out.add([e.subs(mapping) for e in row], r.subs(mapping), lab)
        return out

    def residuals(self, comps):
        """``row . Z - rhs`` for each row."""
        out = []
        for row, r in zip(self.matrix, self.rhs):
            acc = -r
            for e, u in zip(row, self.unknowns):
                if not e.is_zero:
                    acc = acc + e * comps.get(u, ZERO)
            out.append(acc)
        return out


@dataclass
class Dynamics:
    verdict: Verdict4
    Z: VecField | None
    kernel: list = field(default_factory=list)
    secondary: list = field(default_factory=list)
    witness: str | None = None
    provenance: str = ""
    substitutions: dict = field(default_factory=dict)  # coordinate -> Expr on the surface
    system: System | None = None
    unresolved: list = field(default_factory=list)  # conditions left after one pass

    @property
    def chart(self):
        return self.system.chart if self.system else None

    def on_surface(self, e):
        if not self.substitutions:
            return e
        return e.subs(self.substitutions)

    def check(self):
        """Residuals of every row at ``Z`` on the constraint surface (all zero when solved)."""
        if self.Z is None:
            return []
        return [self.on_surface(r) for r in self.system.residuals(self.Z.comps)]

    def to_dict(self):
        d = {
            "verdict": str(self.verdict),
            "provenance": self.provenance,
        }
        if self.Z is not None:
            d["Z"] = {n: self.Z[n].text for n in self.chart.coordinates}
        d["gauge_basis"] = [{n: k[n].text for n in self.chart.coordinates if not k[n].is_zero}
                            for k in self.kernel]
        d["secondary_constraints"] = [c.text for c in self.secondary]
        if self.substitutions:
            d["surface_substitutions"] = {k: v.text for k, v in self.substitutions.items()}
        if self.unresolved:
            d["unresolved_conditions"] = [c.text for c in self.unresolved]
        if self.witness:
            d["witness"] = self.witness
        return d


# --------------------------------------------------------------------------
# assembly


def _variation_basis(problem: GVProblem):
    chart = problem.chart
    t = chart.require_time()
    if problem.variation is VariationClass.ALL_FIELDS:
        return None, ()
    if problem.variation is VariationClass.VERTICAL:
        return None, ((t,),)
    # vakonomic forms constrain the variation flow, not the variation directions
    forms = [lag.tau(chart)] + list(problem.constraints.I1nh)
    forms += [ext_d(f, chart) for f in problem.constraints.I0]
    eqs = []
    for f in forms:
        for row, _, _ in contraction_rows(f, 0, chart.coordinates):
            eqs.append(row)
    sol = solve_linear(eqs, [ZERO] * len(eqs), chart.coordinates)
    return [VecField(chart, k) for k in sol.kernel], ()


def assemble(problem: GVProblem) -> System:
    chart = problem.chart
    chart.require_time()
    sysm = System(chart, list(chart.coordinates))
    sysm.add_contraction(lag.tau(chart), 1, "transversality")
    for k, alpha in enumerate(problem.constraints.forms()):
        sysm.add_contraction(alpha, 0, f"constraint {k}")
    for k, f in enumerate(problem.constraints.I0):
        sysm.add_contraction(ext_d(f, chart), 0, f"tangency to I0[{k}]")
    omega = problem.omega
    if omega.is_zero:
        return sysm
    basis, skip = _variation_basis(problem)
    if basis is None:
        sysm.add_contraction(omega, None, "field equation", skip=skip)
    else:
        rows = contraction_rows(omega, None, sysm.unknowns)
        by_label = {lab: (row, r) for row, r, lab in rows}
        for j, xi in enumerate(basis):
            acc = [ZERO] * len(sysm.unknowns)
            rhs = ZERO
            for n, c in xi.comps.items():
                if (n,) in by_label:
                    row, r = by_label[(n,)]
                    acc = [a + c * e for a, e in zip(acc, row)]
                    rhs = rhs + c * r
            sysm.add(acc, rhs, f"field equation, variation {j} ({xi})")
    return sysm


# --------------------------------------------------------------------------
# solving


def _solvable_for(c: Expr, chart, taken):
    """Coordinate ``x`` and value with ``c = 0  <=>  x = value`` (``c`` linear in ``x``)."""
    by_role = {r: [] for r in _SOLVE_ORDER}
    for n, r in zip(chart.coordinates, chart.roles):
        if r in by_role and n in c.free and n not in taken:
            by_role[r].append(n)
    for r in _SOLVE_ORDER:
        for x in by_role[r]:
            cx = c.diff(x)
            if x in cx.free or cx.is_zero:
                continue
            if is_zero(cx) is not Verdict.NONZERO:
                continue
            value = sym(x) - c / cx
            if x in value.free:
                continue
            return x, value
    return None


def _solve_pass(sysm: System):
    sol = solve_linear(sysm.matrix, sysm.rhs, sysm.unknowns)
    sol.labels = sysm.labels
    return sol


def _finish(sysm, sol, secondary, subs, provenance, unresolved=()):
    chart = sysm.chart
    if sol.inconsistent:
        return Dynamics(Verdict4.INCONSISTENT, None, [], secondary, sol.witness(), provenance,
                        subs, sysm, list(unresolved))
    Z = VecField(chart, sol.particular)
    kernel = [VecField(chart, k) for k in sol.kernel]
    if secondary:
        verdict = Verdict4.CONSTRAINED_SURFACE
    elif kernel:
        verdict = Verdict4.GAUGE
    else:
        verdict = Verdict4.UNIQUE
    witness = None
    if kernel:
        witness = f"gauge freedom of dimension {len(kernel)}"
    if unresolved:
        witness = ("conditions remaining after one propagation pass: "
                   + ", ".join(f"{c} = 0" for c in unresolved))
    return Dynamics(verdict, Z, kernel, secondary, witness, provenance, subs, sysm,
                    list(unresolved))


def solve_system(sysm: System, provenance="", I0=()) -> Dynamics:
    """Eliminate, then run one pass of the constraint algorithm."""
    chart = sysm.chart
    subs = {}
    I0 = [normalize_function(f) for f in I0 if not f.is_zero]
    for f in I0:
        hit = _solvable_for(f, chart, set(subs))
        if hit:
            x, val = hit
            subs = {k: v.subs({x: val}) for k, v in subs.items()}
            subs[x] = val
    base = sysm.subs(subs) if subs else sysm
    sol = _solve_pass(base)
    if sol.inconsistent or not sol.conditions:
        return _finish(base, sol, [], subs, provenance)
    secondary = list(sol.conditions)
    extended = System(chart, sysm.unknowns, list(sysm.matrix), list(sysm.rhs), list(sysm.labels))
    for k, c in enumerate(secondary):
        dc = ext_d(c, chart)
        extended.add_contraction(dc, 0, f"tangency to secondary constraint {k}")
    for c in secondary:
        c = c.subs(subs) if subs else c
        hit = _solvable_for(c, chart, set(subs))
        if hit:
            x, val = hit
            subs = {k: v.subs({x: val}) for k, v in subs.items()}
            subs[x] = val
    restricted = extended.subs(subs) if subs else extended
    sol2 = _solve_pass(restricted)
    unresolved = [] if sol2.inconsistent else list(sol2.conditions)
    return _finish(restricted, sol2, secondary, subs, provenance, unresolved)


def derive_dynamics(problem: GVProblem) -> Dynamics:
    """Solve ``i_Z dt = 1``, ``i_Z alpha = 0``, ``i_xi i_Z Omega = 0`` for ``Z``."""
    sysm = assemble(problem)
    return solve_system(sysm, problem.provenance, problem.constraints.I0)


def herglotz_el(L: Expr, eta: DiffForm, chart=None, I0=()) -> Dynamics:
    """Herglotz-Euler-Lagrange system: for each ``j``
    ``i_Z(dL/dq^j dt - d(dL/dv^j) + dL/ds dL/dv^j dt) = 0`` together with
    ``i_Z eta = 0``, ``i_Z kappa^i = 0`` and ``i_Z dt = 1``."""
    chart = chart or eta.chart
    s = lag._single_action(chart)
    dt = lag.tau(chart)
    sysm = System(chart, list(chart.coordinates))
    sysm.add_contraction(dt, 1, "transversality")
    sysm.add_contraction(eta, 0, "action constraint")
    for k, kappa in enumerate(lag.cartan_forms(chart)):
        sysm.add_contraction(kappa, 0, f"holonomy {k}")
    Ls = L.diff(s)
    for q, v in lag.position_velocity_pairs(chart):
        Lv = L.diff(v)
        beta = dt * (L.diff(q) + Ls * Lv) - ext_d(Lv, chart)
        if beta.is_zero:
            sysm.add([ZERO] * len(sysm.unknowns), ZERO, f"Herglotz equation for {q}")
        else:
            sysm.add_contraction(beta, 0, f"Herglotz equation for {q}")
    for k, f in enumerate(I0):
        sysm.add_contraction(ext_d(f, chart), 0, f"tangency to I0[{k}]")
    return solve_system(sysm, "herglotz_el", I0)


# --------------------------------------------------------------------------
# transversality reduction


@dataclass
class Reduction:
    exists: bool
    X: VecField | None
    kernel: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    witness: str | None = None

    def to_dict(self):
        d = {"exists": self.exists}
        if self.X is not None:
            d["X"] = str(self.X)
            d["kernel"] = [str(k) for k in self.kernel]
        if self.conditions:
            d["conditions"] = [c.text for c in self.conditions]
        if self.witness:
            d["witness"] = self.witness
        return d


def check_transversality_reduction(omega: DiffForm, sigma_t: DiffForm, R_t: VecField,
                                   constraints=()) -> Reduction:
    """Vertical ``X`` with ``i_X omega = sigma_t`` and ``i_{R_t - X} alpha = 0``."""
    chart = omega.chart
    t = chart.require_time()
    unknowns = [n for n in chart.coordinates if n != t]
    sysm = System(chart, unknowns)
    sysm.add_contraction(omega, sigma_t, "i_X omega = sigma_t")
    for k, alpha in enumerate(constraints):
        sysm.add_contraction(alpha, iota(R_t, alpha), f"constraint {k}")
    sol = _solve_pass(sysm)
    if sol.inconsistent:
        return Reduction(False, None, [], [], sol.witness())
    X = VecField(chart, sol.particular)
    kernel = [VecField(chart, k) for k in sol.kernel]
    witness = None
    if sol.conditions:
        witness = "solvable only where " + ", ".join(f"{c} = 0" for c in sol.conditions)
    return Reduction(not sol.conditions, X, kernel, list(sol.conditions), witness)


# --------------------------------------------------------------------------
# equivalence


@dataclass
class Comparison:
    passed: bool
    reason: str
    details: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return "Pass" if self.passed else "Fail"

    def to_dict(self):
        d = {"verdict": self.verdict, "reason": self.reason}
        d.update(self.details)
        return d


def _in_span(vec: dict, basis, unknowns):
    """Whether ``vec`` is a combination of ``basis`` (function coefficients)."""
    if all(vec.get(u, ZERO).is_zero for u in unknowns):
        return True
    if not basis:
        return False
    names = [f"c{i}" for i in range(len(basis))]
    matrix = [[b[u] for b in basis] for u in unknowns]
    rhs = [vec.get(u, ZERO) for u in unknowns]
    sol = solve_linear(matrix, rhs, names)
    return not sol.inconsistent and not sol.conditions


def _compare_fields(Z1, K1, Z2, K2, unknowns, subs):
    def f(e):
        return e.subs(subs) if subs else e

    diff = {u: f(Z1[u]) - f(Z2[u]) for u in unknowns}
    k1 = [{u: f(k[u]) for u in unknowns} for k in K1]
    k2 = [{u: f(k[u]) for u in unknowns} for k in K2]
    if not all(_in_span(k, k2, unknowns) for k in k1):
        return False, "gauge kernels differ"
    if not all(_in_span(k, k1, unknowns) for k in k2):
        return False, "gauge kernels differ"
    if not _in_span(diff, k1, unknowns):
        bad = [f"{u}: {d}" for u, d in diff.items() if not d.is_zero]
        return False, "particular fields differ (" + "; ".join(bad) + ")"
    return True, "fields agree modulo gauge"


def compare_dynamics(d1: Dynamics, d2: Dynamics) -> Comparison:
    details = {"first": d1.to_dict(), "second": d2.to_dict()}
    if d1.verdict is not d2.verdict:
        reason = f"verdicts differ: {d1.verdict} vs {d2.verdict}"
        if d1.Z is not None and d2.Z is not None and d1.chart == d2.chart:
            _, why = _compare_fields(d1.Z, [], d2.Z, [], d1.chart.coordinates, {})
            reason += "; " + why
        return Comparison(False, reason, details)
    if d1.verdict is Verdict4.INCONSISTENT:
        return Comparison(True, "both inconsistent", details)
    if d1.chart != d2.chart:
        raise ChartError("dynamics live on different charts")
    subs = dict(d1.substitutions)
    for k, v in d2.substitutions.items():
        subs.setdefault(k, v)
    s1 = {normalize_function(c.subs(subs)) for c in d1.secondary}
    s2 = {normalize_function(c.subs(subs)) for c in d2.secondary}
    s1.discard(ZERO)
    s2.discard(ZERO)
    if s1 != s2:
        return Comparison(False, "secondary constraint surfaces differ", details)
    ok, why = _compare_fields(d1.Z, d1.kernel, d2.Z, d2.kernel, d1.chart.coordinates, subs)
    return Comparison(ok, why, details)


def verify_equivalence(p1: GVProblem, p2: GVProblem) -> Comparison:
    """Derive both problems and compare the solved fields modulo gauge and surface."""
    return compare_dynamics(derive_dynamics(p1), derive_dynamics(p2))


def pushforward(Z: VecField, proj: CoordMap) -> dict:
    """Components ``Z(proj^b)`` of the pushed field, as functions on the source chart."""
    return {b: Z(proj.components[b]) for b in proj.target.coordinates}


def project_and_compare(extended: Dynamics, base: Dynamics, proj: CoordMap,
                        shift_coords=()) -> Comparison:
    """Push ``extended.Z`` through ``proj`` and compare with ``base.Z`` on the surface.

    For each coordinate in ``shift_coords`` (momenta of action type) also checks
    that lifts differing by a constant in that coordinate both solve.
    """
    details = {"extended": extended.to_dict(), "base": base.to_dict()}
    if extended.verdict is Verdict4.INCONSISTENT or base.verdict is Verdict4.INCONSISTENT:
        same = extended.verdict is base.verdict
        return Comparison(same, "inconsistency " + ("agrees" if same else "differs"), details)
    if proj.source != extended.chart or proj.target != base.chart:
        raise VarigeoError("projection does not connect the two charts")
    subs = dict(extended.substitutions)
    target = proj.target.coordinates

    def on_surface(e):
        return e.subs(subs) if subs else e

    def push(V):
        return {b: on_surface(e) for b, e in pushforward(V, proj).items()}

    pz = push(extended.Z)
    extra = set(proj.source.coordinates) - set(target)
    leaked = sorted({n for e in pz.values() for n in e.free} & extra)
    if leaked:
        details["projected_Z"] = {b: e.text for b, e in pz.items()}
        return Comparison(False, "projected field depends on " + ", ".join(leaked), details)
    pk = [push(k) for k in extended.kernel]
    pk = [k for k in pk if not all(v.is_zero for v in k.values())]
    bsubs = {k: v for k, v in base.substitutions.items()}
    zb = {b: (base.Z[b].subs(bsubs) if bsubs else base.Z[b]) for b in target}
    kb = [{b: (k[b].subs(bsubs) if bsubs else k[b]) for b in target} for k in base.kernel]
    details["projected_Z"] = {b: e.text for b, e in pz.items()}
    diff = {b: pz[b] - zb[b] for b in target}
    if not all(_in_span(k, kb, target) for k in pk):
        return Comparison(False, "projected gauge directions are not base gauge directions",
                          details)
    if not _in_span(diff, kb, target):
        bad = [f"{u}: {d}" for u, d in diff.items() if not d.is_zero]
        return Comparison(False, "projected field differs (" + "; ".join(bad) + ")", details)
    checks = []
    for c in shift_coords:
        checks.append(_constant_shift(extended, c))
    if checks:
        details["constant_shift"] = [ch for ch, _ in checks]
        if not all(ok for _, ok in checks):
            return Comparison(False, "constant-offset lift fails", details)
    return Comparison(True, "projected field matches base on the constraint surface", details)


def _constant_shift(dyn: Dynamics, coord):
    """Shift ``coord`` by a fresh constant; ``Z`` must still satisfy every row."""
    chart = dyn.chart
    k = 0
    while f"shift{k}" in chart.coordinates or f"shift{k}" in chart.parameters:
        k += 1
    c = sym(f"shift{k}")
    shift = {coord: sym(coord) + c}
    Z = dyn.Z
    comps = {n: Z[n].subs(shift) for n in chart.coordinates}
    res = [dyn.on_surface(r) for r in dyn.system.subs(shift).residuals(comps)]
    z_free = all(coord not in Z[n].free for n in chart.coordinates)
    ok = z_free and all(r.is_zero for r in res)
    return {"coordinate": coord, "Z_independent": z_free,
            "rows_satisfied": all(r.is_zero for r in res), "passed": ok}, ok


__all__ = [
    "Comparison", "Dynamics", "Reduction", "System", "Verdict4", "assemble",
    "check_transversality_reduction", "compare_dynamics", "derive_dynamics", "herglotz_el",
    "project_and_compare", "pushforward", "solve_system", "verify_equivalence",
]
