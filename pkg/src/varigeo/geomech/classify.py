"""Structure classification of Lagrangian data.

Every flag carries a witness: a symbolic object proving it (a Reeb field, a
nonzero top form) or the identity that fails. Undecided verdicts are reported
as such and never defaulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from varigeo.errors import RankUndecided
from varigeo.excalc import DiffForm, VecField, ext_d, iota, kernel_basis, lie, solve_linear, wedge
from varigeo.geomech import constructions as cons
from varigeo.geomech import lagrangian as lag
from varigeo.symexpr import ZERO, Verdict


@dataclass
class Flag:
    holds: bool | None
    witness: str
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"holds": self.holds, "witness": self.witness}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass
class StructureReport:
    flags: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.flags[name]

    def to_dict(self):
        return {"flags": {k: v.to_dict() for k, v in self.flags.items()}, "notes": list(self.notes)}


def _guard(fn):
    try:
        return fn()
    except RankUndecided as exc:
        return Flag(None, f"undecided: {exc}", {"pivot": str(exc.pivot)})


def _verdict_flag(form, positive, negative):
    v = cons.form_verdict(form)
    if v is Verdict.NONZERO:
        return Flag(True, f"{positive} = {form}")
    if v is Verdict.ZERO:
        return Flag(False, f"{negative} = 0")
    return Flag(None, f"undecided: {positive} = {form}")


def _reeb_flag(family, label):
    if family.exists:
        kern = ", ".join(str(k) for k in family.kernel) or "none"
        return Flag(True, f"{label}: R = {family.particular} (+ span of {kern})",
                    family.to_dict())
    return Flag(False, f"{label}: no solution, {family.witness}", family.to_dict())


def restricted_rank(eta: DiffForm):
    """Rank of ``d eta`` restricted to ``ker eta`` (symbolic, generic)."""
    basis = kernel_basis(eta)
    d_eta = ext_d(eta)
    m = [[iota(b, iota(a, d_eta)) if not d_eta.is_zero else ZERO for b in basis] for a in basis]
    if not basis:
        return 0, basis
    sol = solve_linear(m, [ZERO] * len(basis), [f"c{i}" for i in range(len(basis))])
    return sol.rank, basis


def classify(L, chart, sections=None) -> StructureReport:
    """Populate every flag that applies to ``chart`` (time and/or action coordinates)."""
    rep = StructureReport()
    sections = set(sections or ("hessian", "cosymplectic", "contact", "absorbed"))
    pairs = lag.position_velocity_pairs(chart)
    n = len(pairs)
    has_time = chart.time is not None
    actions = chart.with_role("action")

    if "hessian" in sections:
        def hess():
            h = lag.hessian_inverse(L, chart)
            if h.regular:
                return Flag(True, "W = " + str([[e.text for e in r] for r in h.W]), h.to_dict())
            return Flag(False, h.certificate(), h.to_dict())

        rep.flags["hessian_regular"] = _guard(hess)

    if has_time and "cosymplectic" in sections:
        t = chart.time
        dt = lag.tau(chart)
        omega_L = lag.lagrangian_two_form(L, chart)

        def cosym():
            top = wedge(dt, cons.wedge_power(omega_L, n))
            return _verdict_flag(top, "tau^omega_L^n", "tau^omega_L^n")

        rep.flags["cosymplectic"] = _guard(cosym)
        rep.flags["precosymplectic_reeb"] = _guard(lambda: _reeb_flag(
            cons.reeb_solve(chart, [(dt, 1), (omega_L, None)]), "(omega_L, tau) Reeb"))

        def modified():
            split = cons.modified_precosymplectic(L, chart)
            Rt = split.R_t
            r = iota(Rt, split.omega)
            ok = (r == 0 if not isinstance(r, DiffForm) else r.is_zero)
            return Flag(ok, f"omega = {split.omega}; sigma_t = {split.sigma_t}; "
                        f"i_d/dt omega = {r if not isinstance(r, DiffForm) else r}",
                        {"omega": str(split.omega), "sigma_t": str(split.sigma_t),
                         "reeb": str(Rt)})

        rep.flags["modified_precosymplectic_reeb"] = _guard(modified)

        def autonomous():
            split = cons.split_transversal(ext_d(lag.poincare_cartan(L, chart)),
                                           VecField.basis(chart, t))
            a = lie(split.R_t, split.omega)
            b = lie(split.R_t, split.sigma_t)
            ok = a.is_zero and b.is_zero
            return Flag(ok, f"L_Rt omega = {a}; L_Rt sigma_t = {b}")

        rep.flags["autonomous"] = _guard(autonomous)

    if len(actions) == 1 and "contact" in sections:
        eta_L = lag.contact_form(L, chart)
        d_eta = ext_d(eta_L)

        def contact():
            top = wedge(eta_L, cons.wedge_power(d_eta, n)) if n else eta_L
            return _verdict_flag(top, "eta_L^(d eta_L)^n", "eta_L^(d eta_L)^n")

        rep.flags["contact"] = _guard(contact)
        reeb = None

        def contact_reeb():
            nonlocal reeb
            reeb = cons.reeb_solve(chart, [(eta_L, 1), (d_eta, None)])
            return _reeb_flag(reeb, "(eta_L, d eta_L) Reeb")

        rep.flags["contact_reeb"] = _guard(contact_reeb)

        def precontact():
            rank, basis = restricted_rank(eta_L)
            dim = chart.dim
            nn = (dim - 1) // 2
            rank_ok = rank % 2 == 0 and rank // 2 < nn if nn else rank == 0
            kern = kernel_basis(d_eta)
            reeb_ok = bool(reeb and reeb.exists)
            detail = {
                "ker_eta": [str(b) for b in basis],
                "ker_d_eta": [str(b) for b in kern],
                "restricted_rank": rank,
                "reeb_exists": reeb_ok,
            }
            holds = rank_ok and reeb_ok
            w = (f"rank of d eta_L on ker eta_L = {rank}; Reeb field "
                 f"{'exists' if reeb_ok else 'does not exist'}")
            if rank_ok and not reeb_ok:
                rep.notes.append(
                    "precontact discrepancy: the restricted rank condition holds but no Reeb "
                    "field exists; the verdict requires both")
            return Flag(holds, w, detail)

        rep.flags["precontact"] = _guard(precontact)

    if has_time and len(actions) == 1 and "absorbed" in sections:
        def premulti():
            pm = cons.premulticontact_reeb(L, chart)
            holds = pm.premulticontact_on_surface
            tang = "feasible" if pm.tangency["feasible"] else "infeasible"
            w = (f"tangency pre-check {tang}; surface eta = {pm.surface_eta}; ")
            if pm.surface_reeb.exists:
                w += f"surface Reeb R = {pm.surface_reeb.particular}"
            else:
                w += f"no surface Reeb ({pm.surface_reeb.witness})"
            return Flag(holds, w, pm.to_dict())

        rep.flags["premulticontact"] = _guard(premulti)

        def lcs():
            eta = lag.herglotz_constraint(L, chart)
            ab = cons.absorb_mixed(L, [eta], chart)
            defect = cons.lcs_defect(ab)
            lee = lie(ab.lee, ab.omega_check)
            return Flag(defect.is_zero and lee.is_zero,
                        f"d Omega_check - dp_s^Omega_check = {defect}; L_U Omega_check = {lee}",
                        {"omega_check": str(ab.omega_check), "eta_check": str(ab.eta_check),
                         "lee_field": str(ab.lee)})

        rep.flags["lcs"] = _guard(lcs)
    return rep
