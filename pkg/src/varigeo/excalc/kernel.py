"""Linear equations in the components of an unknown vector field.

Every equation has the shape ``i_Z form = target``; this module turns a list of
them into a matrix over expressions and solves it. Kernels of 1- and 2-forms,
Reeb-type fields and equations of motion are all instances.
"""

from __future__ import annotations

from varigeo.errors import ChartError
from varigeo.excalc.forms import DiffForm, VecField, iota
from varigeo.excalc.linalg import LinearSolution, numeric_kernel, solve_linear
from varigeo.symexpr import ZERO, Expr, const


def contraction_rows(form: DiffForm, target, unknowns):
    """Rows ``(coefficients, rhs, label)`` of the system ``i_Z form = target``."""
    chart = form.chart
    if form.degree < 1:
        raise TypeError("cannot contract a 0-form")
    if form.degree == 1:
        row = [form.terms.get((chart.index(n),), ZERO) for n in unknowns]
        t = target if isinstance(target, Expr) else const(target)
        return [(row, t, ())]
    contractions = [iota(VecField.basis(chart, n), form) for n in unknowns]
    if target is None or (not isinstance(target, DiffForm) and const(target).is_zero):
        target = DiffForm.zero(chart, form.degree - 1)
    if target.degree != form.degree - 1 and not target.is_zero:
        raise TypeError("target degree must be one less than the form degree")
    keys = set(target.terms)
    for c in contractions:
        keys |= set(c.terms)
    names = chart.coordinates
    out = []
    for k in sorted(keys):
        row = [c.terms.get(k, ZERO) for c in contractions]
        out.append((row, target.terms.get(k, ZERO), tuple(names[i] for i in k)))
    return out


def solve_contractions(chart, equations, unknowns=None) -> LinearSolution:
    """Solve ``i_Z form = target`` for every ``(form, target)`` in ``equations``.

    ``unknowns`` defaults to all chart coordinates; components outside it are 0.
    """
    unknowns = list(unknowns or chart.coordinates)
    matrix, rhs, labels = [], [], []
    for e, (form, target) in enumerate(equations):
        if form.chart != chart:
            raise ChartError("equation form lives on another chart")
        for row, t, label in contraction_rows(form, target, unknowns):
            matrix.append(row)
            rhs.append(t)
            comp = "^".join("d" + n for n in label) if label else "scalar"
            labels.append(f"equation {e}, {comp} component")
    if not matrix:
        matrix = [[ZERO] * len(unknowns)]
        rhs = [ZERO]
        labels = ["empty"]
    sol = solve_linear(matrix, rhs, unknowns)
    sol.labels = labels
    return sol


def solution_field(chart, values) -> VecField:
    return VecField(chart, {n: v for n, v in values.items()})


def kernel_basis(a: DiffForm, at=None, unknowns=None):
    """Basis of ``{X : i_X a = 0}``.

    Symbolic by default (raises RankUndecided on an undecidable pivot). With a
    point ``at`` the matrix is evaluated there and a numeric SVD basis is
    returned as a :class:`NumericKernel` carrying the rank.
    """
    if not isinstance(a, DiffForm) or a.degree not in (1, 2):
        raise TypeError("kernel_basis expects a 1-form or a 2-form")
    chart = a.chart
    unknowns = list(unknowns or chart.coordinates)
    if at is not None:
        rows = [row for row, _, _ in contraction_rows(a, None if a.degree > 1 else 0, unknowns)]
        return numeric_kernel(rows, unknowns, at)
    sol = solve_contractions(chart, [(a, 0)], unknowns)
    return [VecField(chart, v) for v in sol.kernel]


def rank_of(a: DiffForm) -> int:
    """Rank of the linear map X -> i_X a (generic, symbolic)."""
    sol = solve_contractions(a.chart, [(a, 0)])
    return sol.rank
