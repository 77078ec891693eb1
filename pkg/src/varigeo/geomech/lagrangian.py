"""Lagrangian data on adapted charts (t, q^i, v^i, s^alpha, u^a)."""

from __future__ import annotations

from dataclasses import dataclass, field

from varigeo.errors import ChartError
from varigeo.excalc import DiffForm, VecField, ext_d, solve_linear, wedge
from varigeo.symexpr import ONE, ZERO, Expr, sym


def position_velocity_pairs(chart):
    """``[(q^i, v^i)]`` paired in declaration order."""
    qs = chart.with_role("position")
    vs = chart.with_role("velocity")
    if not vs:
        raise ChartError("chart declares no velocity coordinates")
    if len(qs) != len(vs):
        raise ChartError(
            f"chart has {len(qs)} position and {len(vs)} velocity coordinates; they must pair up"
        )
    return list(zip(qs, vs))


def tau(chart) -> DiffForm:
    return DiffForm.differential(chart, chart.require_time())


def cartan_forms(chart) -> list:
    """Contact forms of the first jet bundle: ``dq^i - v^i dt``."""
    t = chart.require_time()
    dt = DiffForm.differential(chart, t)
    return [DiffForm.differential(chart, q) - dt * sym(v) for q, v in position_velocity_pairs(chart)]


def momenta(L: Expr, chart) -> list:
    """``[dL/dv^i]``."""
    return [L.diff(v) for _, v in position_velocity_pairs(chart)]


def lagrangian_energy(L: Expr, chart) -> Expr:
    """``E_L = v^i dL/dv^i - L``."""
    total = -L
    for _, v in position_velocity_pairs(chart):
        total = total + sym(v) * L.diff(v)
    return total


def poincare_cartan(L: Expr, chart) -> DiffForm:
    """``Theta_L = L dt + (dL/dv^i) kappa^i``."""
    theta = tau(chart) * L
    for (_, v), kappa in zip(position_velocity_pairs(chart), cartan_forms(chart)):
        theta = theta + kappa * L.diff(v)
    return theta


def semibasic_one_form(L: Expr, chart) -> DiffForm:
    """``(dL/dv^i) dq^i``, the coordinate form of the vertical endomorphism applied to dL."""
    out = DiffForm.zero(chart, 1)
    for q, v in position_velocity_pairs(chart):
        out = out + DiffForm.differential(chart, q) * L.diff(v)
    return out


def lagrangian_two_form(L: Expr, chart) -> DiffForm:
    """``omega_L = -d(dL/dv^i) ^ dq^i``."""
    out = DiffForm.zero(chart, 2)
    for q, v in position_velocity_pairs(chart):
        out = out - wedge(ext_d(L.diff(v), chart), DiffForm.differential(chart, q))
    return out


def contact_form(L: Expr, chart, action=None) -> DiffForm:
    """``eta_L = ds - (dL/dv^i) dq^i`` (no time component)."""
    s = action or _single_action(chart)
    out = DiffForm.differential(chart, s)
    for q, v in position_velocity_pairs(chart):
        out = out - DiffForm.differential(chart, q) * L.diff(v)
    return out


def herglotz_constraint(L: Expr, chart, action=None) -> DiffForm:
    """``eta = ds + E_L dt - (dL/dv^i) dq^i``."""
    return contact_form(L, chart, action) + tau(chart) * lagrangian_energy(L, chart)


def _single_action(chart):
    s = chart.with_role("action")
    if len(s) != 1:
        raise ChartError(f"expected exactly one action coordinate, found {len(s)}")
    return s[0]


def hessian(L: Expr, chart) -> list:
    vs = [v for _, v in position_velocity_pairs(chart)]
    return [[L.diff(a).diff(b) for b in vs] for a in vs]


@dataclass
class HessianInverse:
    """Inverse ``W`` of the velocity Hessian, or a certificate of its singularity."""

    regular: bool
    hessian: list
    W: list | None = None
    rank: int = 0
    kernel: list = field(default_factory=list)  # null vectors of the Hessian when singular

    def certificate(self):
        if self.regular:
            return None
        vecs = ["(" + ", ".join(str(e) for e in k.values()) + ")" for k in self.kernel]
        return f"Hessian has rank {self.rank} < {len(self.hessian)}; null vectors {', '.join(vecs)}"

    def to_dict(self):
        d = {
            "regular": self.regular,
            "hessian": [[e.text for e in row] for row in self.hessian],
            "rank": self.rank,
        }
        if self.regular:
            d["W"] = [[e.text for e in row] for row in self.W]
        else:
            d["certificate"] = self.certificate()
        return d


def hessian_inverse(L: Expr, chart) -> HessianInverse:
    """Symbolic ``W^{ij}`` with ``W^{ij} d2L/dv^j dv^k = delta^i_k``."""
    H = hessian(L, chart)
    n = len(H)
    names = [f"x{i}" for i in range(n)]
    probe = solve_linear(H, [ZERO] * n, names)
    if probe.rank < n:
        return HessianInverse(False, H, None, probe.rank, probe.kernel)
    cols = []
    for k in range(n):
        e = [ONE if i == k else ZERO for i in range(n)]
        sol = solve_linear(H, e, names)
        cols.append([sol.particular[x] for x in names])
    W = [[cols[j][i] for j in range(n)] for i in range(n)]
    return HessianInverse(True, H, W, n)


def regular_time_reeb(L: Expr, chart, W=None) -> VecField:
    """``R_t = d/dt - W^{ij} d2L/dt dv^j d/dv^i`` (requires regular L)."""
    t = chart.require_time()
    W = W or _require_W(L, chart)
    pairs = position_velocity_pairs(chart)
    comps = {t: ONE}
    for i, (_, vi) in enumerate(pairs):
        c = ZERO
        for j, (_, vj) in enumerate(pairs):
            c = c + W[i][j] * L.diff(t).diff(vj)
        comps[vi] = -c
    return VecField(chart, comps)


def regular_action_reeb(L: Expr, chart, W=None, action=None) -> VecField:
    """``R_s = d/ds - W^{ij} d2L/ds dv^j d/dv^i`` (requires regular L)."""
    s = action or _single_action(chart)
    W = W or _require_W(L, chart)
    pairs = position_velocity_pairs(chart)
    comps = {s: ONE}
    for i, (_, vi) in enumerate(pairs):
        c = ZERO
        for j, (_, vj) in enumerate(pairs):
            c = c + W[i][j] * L.diff(s).diff(vj)
        comps[vi] = -c
    return VecField(chart, comps)


def lagrangian_field(L: Expr, chart, W=None) -> VecField:
    """``X = -v^i d/dq^i - W^{ij}(dL/dq^j - v^k d2L/dq^k dv^j) d/dv^i``; ``Z = R_t - X``."""
    W = W or _require_W(L, chart)
    pairs = position_velocity_pairs(chart)
    comps = {}
    for i, (qi, vi) in enumerate(pairs):
        comps[qi] = -sym(vi)
        c = ZERO
        for j, (qj, vj) in enumerate(pairs):
            inner = L.diff(qj)
            for qk, vk in pairs:
                inner = inner - sym(vk) * L.diff(qk).diff(vj)
            c = c + W[i][j] * inner
        comps[vi] = -c
    return VecField(chart, comps)


def _require_W(L, chart):
    h = hessian_inverse(L, chart)
    if not h.regular:
        raise ChartError("this construction needs a regular Lagrangian: " + h.certificate())
    return h.W
