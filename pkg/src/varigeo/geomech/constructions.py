"""Constructions of 2-forms and Reeb-type fields from variational data."""

from __future__ import annotations

from dataclasses import dataclass, field

from varigeo.errors import ChartError, HypothesisError, RankUndecided
from varigeo.excalc import (
    Chart,
    CoordMap,
    DiffForm,
    VecField,
    ext_d,
    iota,
    lift,
    pullback,
    solve_contractions,
    solve_linear,
    wedge,
)
from varigeo.geomech import lagrangian as lag
from varigeo.symexpr import ONE, ZERO, Expr, Verdict, is_zero, sym, ufun


def form_verdict(f) -> Verdict:
    """Zero if structurally zero, NonZero if some coefficient is certified nonzero."""
    if isinstance(f, Expr):
        return is_zero(f)
    if f.is_zero:
        return Verdict.ZERO
    undecided = False
    for c in f.terms.values():
        v = is_zero(c)
        if v is Verdict.NONZERO:
            return Verdict.NONZERO
        if v is Verdict.UNKNOWN:
            undecided = True
    return Verdict.UNKNOWN if undecided else Verdict.ZERO


def wedge_power(f: DiffForm, n: int) -> DiffForm:
    out = None
    for _ in range(n):
        out = f if out is None else wedge(out, f)
    return out


# --------------------------------------------------------------------------
# transversality split


@dataclass
class TransversalSplit:
    omega: DiffForm
    sigma_t: DiffForm
    R_t: VecField


def split_transversal(Omega: DiffForm, R_t: VecField) -> TransversalSplit:
    """``sigma_t = i_{R_t} Omega`` and ``omega = Omega + sigma_t ^ tau``."""
    chart = Omega.chart
    t = chart.require_time()
    if R_t[t] != 1:
        raise HypothesisError(f"normalization failure: i_R dt = {R_t[t]}, expected 1")
    sigma = iota(R_t, Omega)
    if isinstance(sigma, Expr):
        sigma = DiffForm.zero(chart, 1)
    omega = Omega + wedge(sigma, lag.tau(chart))
    return TransversalSplit(omega, sigma, R_t)


# --------------------------------------------------------------------------
# Reeb-type solves


@dataclass
class ReebFamily:
    """General solution ``particular + span(kernel)`` or a nonexistence witness."""

    chart: Chart
    particular: VecField | None
    kernel: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    witness: str | None = None

    @property
    def exists(self):
        return self.particular is not None and not self.conditions

    def to_dict(self):
        d = {"exists": self.exists}
        if self.particular is not None:
            d["particular"] = str(self.particular)
            d["kernel"] = [str(k) for k in self.kernel]
        if self.conditions:
            d["conditions"] = [c.text for c in self.conditions]
        if self.witness:
            d["witness"] = self.witness
        return d


def reeb_solve(chart, constraints, unknowns=None) -> ReebFamily:
    """Solve ``i_R form = target`` for each ``(form, target)``; 2-forms take target 0."""
    sol = solve_contractions(chart, constraints, unknowns)
    if sol.inconsistent:
        return ReebFamily(chart, None, [], [], sol.witness())
    particular = VecField(chart, sol.particular)
    kernel = [VecField(chart, k) for k in sol.kernel]
    witness = None
    if sol.conditions:
        witness = "solvable only where " + ", ".join(f"{c} = 0" for c in sol.conditions)
    return ReebFamily(chart, particular, kernel, sol.conditions, witness)


def _check_normalized(R_list, etas, chart, require_tau=True):
    t = chart.time
    for a, R in enumerate(R_list):
        if require_tau and t is not None and not R[t].is_zero:
            raise HypothesisError(f"normalization failure: i_R{a} dt = {R[t]}, expected 0")
        for b, eta in enumerate(etas):
            val = iota(R, eta)
            want = ONE if a == b else ZERO
            if val != want:
                raise HypothesisError(
                    f"normalization failure: i_R{a} eta{b} = {val}, expected {want}"
                )


def coorientation(etas, chart):
    """Verdict on ``tau ^ eta^1 ^ ... ^ eta^k``."""
    top = lag.tau(chart)
    for eta in etas:
        top = wedge(top, eta)
    return form_verdict(top), top


def omega_bar_nonholonomic(Omega, etas, R_list) -> DiffForm:
    """``Omega + sum sigma_a ^ eta^a`` with ``sigma_a = i_{R_a} Omega``."""
    chart = Omega.chart
    etas = list(etas)
    R_list = list(R_list)
    if len(etas) != len(R_list):
        raise HypothesisError("need one normalizing field per nonholonomic form")
    if not etas:
        return Omega
    _check_normalized(R_list, etas, chart)
    v, top = coorientation(etas, chart)
    if v is Verdict.UNKNOWN:
        raise RankUndecided(f"co-orientation undecided: {top}")
    if v is Verdict.ZERO:
        raise HypothesisError("constraints are not co-oriented: tau ^ eta vanishes")
    out = Omega
    for eta, R in zip(etas, R_list):
        sigma = iota(R, Omega)
        out = out + wedge(sigma, eta)
    return out


def sigma_forms(Omega, R_list):
    return [iota(R, Omega) for R in R_list]


# --------------------------------------------------------------------------
# compatibility


@dataclass
class Condition:
    holds: bool | None
    witness: str

    def to_dict(self):
        return {"holds": self.holds, "witness": self.witness}


@dataclass
class Compatibility:
    conditions: dict

    @property
    def compatible(self):
        return all(c.holds for c in self.conditions.values())

    def to_dict(self):
        return {
            "compatible": self.compatible,
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
        }


def adapted_shape(etas, chart):
    """Check ``eta^a = ds^a + b dq + h dt + c du`` in the declared adapted chart."""
    actions = chart.with_role("action")
    allowed = set(actions) | set(chart.with_role("position")) | set(chart.with_role("auxiliary"))
    if chart.time:
        allowed.add(chart.time)
    problems = []
    if len(etas) != len(actions):
        problems.append(f"{len(etas)} nonholonomic forms for {len(actions)} action coordinates")
    for a, eta in enumerate(etas):
        for (name,), c in eta.coefficients().items():
            if name not in allowed:
                problems.append(f"eta{a} has a d{name} component {c}")
        for b, s in enumerate(actions):
            c = eta.coeff(s)
            want = ONE if a == b else ZERO
            if c != want:
                problems.append(f"eta{a} has ds-coefficient {c} for {s}, expected {want}")
    return problems


def compatibility_check(etas, kappas, chart) -> Compatibility:
    etas = list(etas)
    kappas = list(kappas)
    conds = {}
    problems = adapted_shape(etas, chart)
    conds["generators"] = Condition(
        not problems, "; ".join(problems) or f"{len(etas)} forms in adapted shape"
    )
    # independence of tau, eta, kappa and the dkappa directions
    t = chart.require_time()
    Rt = VecField.basis(chart, t)
    top = lag.tau(chart)
    for eta in etas:
        top = wedge(top, eta)
    for kappa in kappas:
        top = wedge(top, kappa)
    for kappa in kappas:
        top = wedge(top, iota(Rt, ext_d(kappa)))
    literal = lag.tau(chart)
    for eta in etas:
        literal = wedge(literal, eta)
    for kappa in kappas:
        literal = wedge(literal, wedge(kappa, ext_d(kappa)))
    v = form_verdict(top)
    note = f"tau^eta^kappa^(i_dt dkappa) = {top}; literal tau^eta^(kappa^dkappa) = {literal}"
    conds["independence"] = Condition(
        None if v is Verdict.UNKNOWN else v is Verdict.NONZERO, note
    )
    failures = []
    for _, vname in lag.position_velocity_pairs(chart):
        for a, eta in enumerate(etas):
            val = iota(VecField.basis(chart, vname), eta)
            if not val.is_zero:
                failures.append(f"i_d/d{vname} eta{a} = {val}")
    conds["vertical_annihilation"] = Condition(
        not failures, "; ".join(failures) or "every d/dv annihilates every eta"
    )
    return Compatibility(conds)


def omega_bar_mixed(L, etas, R_list, chart) -> DiffForm:
    """``dTheta_L + sum sigma_a ^ eta^a`` with ``sigma_a = i_{R_a} dTheta_L``."""
    etas = list(etas)
    R_list = list(R_list)
    dtheta = ext_d(lag.poincare_cartan(L, chart))
    if not etas:
        return dtheta
    comp = compatibility_check(etas, lag.cartan_forms(chart), chart)
    if not comp.compatible:
        bad = [k for k, c in comp.conditions.items() if not c.holds]
        raise HypothesisError("constraints are not compatible: " + ", ".join(
            f"{k} ({comp.conditions[k].witness})" for k in bad))
    if len(etas) != len(R_list):
        raise HypothesisError("need one normalizing field per nonholonomic form")
    _check_normalized(R_list, etas, chart)
    out = dtheta
    for eta, R in zip(etas, R_list):
        out = out + wedge(iota(R, dtheta), eta)
    return out


def default_action_reebs(L, etas, chart):
    """Regular L: the Hessian-corrected fields; otherwise d/ds^a (valid in adapted shape)."""
    actions = chart.with_role("action")
    h = lag.hessian_inverse(L, chart)
    if h.regular:
        return [lag.regular_action_reeb(L, chart, h.W, s) for s in actions]
    return [VecField.basis(chart, s) for s in actions]


def generic_action_reeb(L, chart, A="A", B="B"):
    """``A^i d/dq^i + B^i d/dv^i + (1 + A^i dL/dv^i) d/ds`` with abstract A, B."""
    pairs = lag.position_velocity_pairs(chart)
    s = lag._single_action(chart)
    args = chart.coordinates
    comps = {}
    sc = ONE
    for i, (q, v) in enumerate(pairs):
        suffix = "" if len(pairs) == 1 else str(i + 1)
        a = ufun(A + suffix, args)
        b = ufun(B + suffix, args)
        comps[q] = a
        comps[v] = b
        sc = sc + a * L.diff(v)
    comps[s] = sc
    return VecField(chart, comps)


# --------------------------------------------------------------------------
# modified precosymplectic structure


def modified_precosymplectic(L, chart) -> TransversalSplit:
    """``omega = -omega_L - d2L/dtdv^i dt^dq^i``, ``sigma_t``, ``R_t = d/dt``."""
    t = chart.require_time()
    dt = lag.tau(chart)
    omega = -lag.lagrangian_two_form(L, chart)
    E = lag.lagrangian_energy(L, chart)
    sigma = ext_d(E, chart) - dt * E.diff(t)
    for q, v in lag.position_velocity_pairs(chart):
        c = L.diff(t).diff(v)
        dq = DiffForm.differential(chart, q)
        omega = omega - wedge(dt, dq) * c
        sigma = sigma + dq * c
    return TransversalSplit(omega, sigma, VecField.basis(chart, t))


# --------------------------------------------------------------------------
# absorption of constraints


def momentum_name(chart, coord, taken):
    base = "p" if len(chart.with_role("position")) == 1 and coord in chart.with_role("position") else None
    for cand in ([base] if base else []) + [f"p_{coord}", f"p{coord}", f"mom_{coord}"]:
        if cand not in taken and not (cand.startswith("d") and cand[1:] in taken):
            return cand
    raise ChartError(f"cannot name the momentum of {coord}")


@dataclass
class Absorbed:
    """Extended chart, unified 2-form and the projection back to the base chart."""

    base: Chart
    chart: Chart
    omega_U: DiffForm
    projection: CoordMap
    momenta: dict  # base coordinate -> momentum name
    eta_check: DiffForm | None = None
    omega_check: DiffForm | None = None
    lee: VecField | None = None


def _extend(chart, coords, role):
    taken = set(chart.coordinates) | set(chart.parameters) | {n for n, _ in chart.functions}
    names = {}
    spec = []
    for c in coords:
        m = momentum_name(chart, c, taken)
        taken.add(m)
        names[c] = m
        spec.append((m, role))
    return chart.extend(spec), names


def absorb_holonomy(L, chart) -> Absorbed:
    """``Omega_U = dL ^ dt + d(p_i kappa^i)`` on the chart extended by ``p_i``."""
    return absorb_mixed(L, [], chart)


def absorb_mixed(L, etas, chart) -> Absorbed:
    """``Omega_U = dL ^ dt + d(p_i kappa^i) + dp_a ^ eta^a``.

    For one nonholonomic form equal to the Herglotz constraint also builds
    ``eta_check = ds - p_i kappa^i - L dt`` and ``Omega_check = -d eta_check + dp_s ^ eta_check``.
    """
    etas = list(etas)
    pairs = lag.position_velocity_pairs(chart)
    if etas:
        comp = compatibility_check(etas, lag.cartan_forms(chart), chart)
        if not comp.compatible:
            raise HypothesisError("constraints are not compatible")
    qs = [q for q, _ in pairs]
    ext, pnames = _extend(chart, qs, "momentum")
    actions = chart.with_role("action") if etas else ()
    if actions:
        ext2, anames = _extend(ext, actions, "action_momentum")
        ext = ext2
        pnames.update(anames)
    kappas = [lift(k, ext) for k in lag.cartan_forms(chart)]
    dt = lag.tau(ext)
    omega = wedge(ext_d(L, ext), dt)
    pk = DiffForm.zero(ext, 1)
    for q, kappa in zip(qs, kappas):
        pk = pk + kappa * sym(pnames[q])
    omega = omega + ext_d(pk)
    for s, eta in zip(actions, etas):
        omega = omega + wedge(DiffForm.differential(ext, pnames[s]), lift(eta, ext))
    proj = CoordMap(ext, chart, {n: sym(n) for n in chart.coordinates})
    out = Absorbed(chart, ext, omega, proj, pnames)
    if len(actions) == 1 and etas[0] == lag.herglotz_constraint(L, chart):
        s = actions[0]
        ps = pnames[s]
        eta_c = DiffForm.differential(ext, s) - pk - dt * L
        out.eta_check = eta_c
        out.omega_check = -ext_d(eta_c) + wedge(DiffForm.differential(ext, ps), eta_c)
        out.lee = VecField.basis(ext, ps)
    return out


def lcs_defect(absorbed: Absorbed) -> DiffForm:
    """``d Omega_check - dp_s ^ Omega_check`` (zero for an lcs-type form)."""
    ps = absorbed.lee
    dps = DiffForm.differential(absorbed.chart, next(iter(ps.comps)))
    return ext_d(absorbed.omega_check) - wedge(dps, absorbed.omega_check)


def momentum_surface(absorbed: Absorbed, L) -> CoordMap:
    """Embedding of ``p_i = dL/dv^i`` into the extended chart."""
    ext = absorbed.chart
    base = absorbed.base
    pnames = absorbed.momenta
    pairs = lag.position_velocity_pairs(base)
    momenta = {pnames[q] for q, _ in pairs}
    keep = [(n, r) for n, r in zip(ext.coordinates, ext.roles) if n not in momenta]
    surface = Chart(tuple(n for n, _ in keep), tuple(r for _, r in keep), ext.parameters,
                    ext.functions)
    comps = {n: sym(n) for n, _ in keep}
    for q, v in pairs:
        comps[pnames[q]] = L.diff(v)
    return CoordMap(surface, ext, comps)


@dataclass
class Premulticontact:
    family: ReebFamily
    family_shape_ok: bool
    tangency: dict  # {"feasible": bool, "g": [...]} or witness
    surface_eta: DiffForm
    surface_reeb: ReebFamily

    @property
    def premulticontact_on_surface(self):
        return self.surface_reeb.exists

    def to_dict(self):
        return {
            "family": self.family.to_dict(),
            "family_shape_ok": self.family_shape_ok,
            "tangency_precheck": self.tangency,
            "surface_eta": str(self.surface_eta),
            "surface_reeb": self.surface_reeb.to_dict(),
            "premulticontact_on_surface": self.premulticontact_on_surface,
        }


def premulticontact_reeb(L, chart) -> Premulticontact:
    """Reeb-type fields of ``eta_check``: the semibasic family, the tangency pre-check
    ``g^i d2L/dv^idv^j + d2L/dsdv^j = 0`` and the direct solve on the momentum surface.

    Both solves are time-adapted: ``i_R dt = 0``, ``i_R eta = 1`` and ``i_R d eta`` a
    multiple of ``dt``.
    """
    s = lag._single_action(chart)
    eta = lag.herglotz_constraint(L, chart)
    ab = absorb_mixed(L, [eta], chart)
    ext = ab.chart
    t = ext.require_time()
    eta_c = ab.eta_check
    d_eta = ext_d(eta_c)
    from varigeo.excalc.kernel import contraction_rows

    unknowns = list(ext.coordinates)
    matrix, rhs = [], []
    for row, tgt, _ in contraction_rows(lag.tau(ext), 0, unknowns):
        matrix.append(row)
        rhs.append(tgt)
    for row, tgt, _ in contraction_rows(eta_c, 1, unknowns):
        matrix.append(row)
        rhs.append(tgt)
    for row, tgt, label in contraction_rows(d_eta, None, unknowns):
        if label == (t,):
            continue
        matrix.append(row)
        rhs.append(tgt)
    sol = solve_linear(matrix, rhs, unknowns)
    if sol.inconsistent:
        family = ReebFamily(ext, None, [], [], sol.witness())
    else:
        family = ReebFamily(ext, VecField(ext, sol.particular),
                            [VecField(ext, k) for k in sol.kernel], sol.conditions)
    pairs = lag.position_velocity_pairs(chart)
    expected_free = {v for _, v in pairs} | {ab.momenta[s]}
    shape_ok = (
        family.particular is not None
        and family.particular == VecField.basis(ext, s)
        and len(family.kernel) == len(expected_free)
        and all(set(k.comps) <= expected_free for k in family.kernel)
    )
    H = lag.hessian(L, chart)
    n = len(pairs)
    gnames = [f"g{i + 1}" for i in range(n)]
    Ht = [[H[i][j] for i in range(n)] for j in range(n)]
    rhs = [-L.diff(s).diff(v) for _, v in pairs]
    tsol = solve_linear(Ht, rhs, gnames)
    if tsol.inconsistent or tsol.conditions:
        tangency = {"feasible": False, "witness": tsol.witness() or "residual conditions " +
                    ", ".join(c.text for c in tsol.conditions)}
    else:
        tangency = {"feasible": True, "g": {g: tsol.particular[g].text for g in gnames},
                    "free": len(tsol.kernel)}
    iota_map = momentum_surface(ab, L)
    s_eta = pullback(iota_map, eta_c)
    surf = iota_map.source
    # time-adapted: i_R dt = 0 and i_R d eta vanishes modulo dt
    ti = surf.index(t)
    d_s = ext_d(s_eta)
    d_spatial = DiffForm(surf, 2, {k: c for k, c in d_s.terms.items() if ti not in k})
    surface_reeb = reeb_solve(surf, [(s_eta, 1), (d_spatial, None)],
                              [n for n in surf.coordinates if n != t])
    return Premulticontact(family, shape_ok, tangency, s_eta, surface_reeb)
