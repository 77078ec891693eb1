"""Gaussian elimination over the field of canonical expressions.

Pivots are certified with the three-valued zero test. Constant pivots are
preferred, then the shortest certified-nonzero entry; an entry whose verdict is
``Unknown`` is never used as a pivot, and if only such entries remain the
elimination stops with :class:`RankUndecided` instead of guessing a rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from varigeo.errors import RankUndecided
from varigeo.symexpr import ONE, ZERO, Expr, Verdict, const, is_zero


@dataclass
class LinearSolution:
    """Solution set ``particular + span(kernel)`` valid where ``conditions`` vanish.

    ``conditions`` are nonconstant residuals of the reduced system (each must be 0
    for a solution to exist); ``inconsistent`` is set when a nonzero constant
    residual appears, in which case ``particular`` is None.
    """

    unknowns: list
    particular: dict | None
    kernel: list
    conditions: list = field(default_factory=list)
    inconsistent: bool = False
    rank: int = 0
    pivots: list = field(default_factory=list)
    residuals: list = field(default_factory=list)  # (row index, nonzero residual)
    labels: list = field(default_factory=list)

    def witness(self):
        """Human-readable description of the first failing row, if any."""
        for k, r in self.residuals:
            if r.is_constant:
                where = f" ({self.labels[k]})" if k < len(self.labels) else ""
                return f"row {k}{where} reduces to 0 = {r}"
        return None


def _choose_pivot(rows, ncols, used_rows, used_cols):
    best = None
    unknown = None
    candidates = []
    for r, row in enumerate(rows):
        if r in used_rows:
            continue
        for c in range(ncols):
            if c in used_cols:
                continue
            e = row[c]
            if e.is_zero:
                continue
            if e.is_constant:
                key = (0, c, r)
                if best is None or key < best[0]:
                    best = (key, r, c)
            else:
                candidates.append((len(e.text), c, r))
    if best is not None:
        return best[1], best[2]
    for _, c, r in sorted(candidates):
        v = is_zero(rows[r][c])
        if v is Verdict.NONZERO:
            return r, c
        if unknown is None:
            unknown = rows[r][c]
    if unknown is not None:
        raise RankUndecided(
            f"cannot decide whether pivot {unknown} vanishes; rank undecided", pivot=unknown
        )
    return None


def rref(matrix, rhs=None):
    """Reduced row echelon form with full pivoting.

    Returns ``(rows, rhs, pivots)`` where ``pivots`` is a list of ``(row, col)``.
    """
    rows = [list(r) for r in matrix]
    b = list(rhs) if rhs is not None else [ZERO] * len(rows)
    ncols = len(rows[0]) if rows else 0
    used_rows, used_cols = set(), set()
    pivots = []
    while True:
        found = _choose_pivot(rows, ncols, used_rows, used_cols)
        if found is None:
            break
        r, c = found
        p = rows[r][c]
        if p != 1:
            inv = ONE / p
            rows[r] = [e * inv if not e.is_zero else e for e in rows[r]]
            b[r] = b[r] * inv
        pr = rows[r]
        for k in range(len(rows)):
            if k == r:
                continue
            f = rows[k][c]
            if f.is_zero:
                continue
            rows[k] = [e - f * pe if not pe.is_zero else e for e, pe in zip(rows[k], pr)]
            b[k] = b[k] - f * b[r]
        used_rows.add(r)
        used_cols.add(c)
        pivots.append((r, c))
    return rows, b, pivots


def _clear_denominators(vec):
    """Scale a vector so that all entries are polynomials."""
    scale = ONE
    for e in vec.values():
        if not e.is_polynomial:
            scale = scale * (scale / e.denominator).denominator
    if scale == 1:
        return vec
    return {k: v * scale for k, v in vec.items()}


def solve_linear(matrix, rhs, unknowns, clear=True) -> LinearSolution:
    """Solve ``matrix @ x = rhs`` symbolically for the named ``unknowns``."""
    unknowns = list(unknowns)
    n = len(unknowns)
    matrix = [[e if isinstance(e, Expr) else const(e) for e in row] for row in matrix]
    rhs = [e if isinstance(e, Expr) else const(e) for e in rhs]
    rows, b, pivots = rref(matrix, rhs)
    pivot_rows = {r for r, _ in pivots}
    conditions = []
    residuals = []
    inconsistent = False
    for k in range(len(rows)):
        if k in pivot_rows or b[k].is_zero:
            continue
        residuals.append((k, b[k]))
        if b[k].is_constant:
            inconsistent = True
        else:
            conditions.append(b[k])
    pivot_cols = {c: r for r, c in pivots}
    free_cols = [c for c in range(n) if c not in pivot_cols]
    particular = None
    if not inconsistent:
        particular = {}
        for c in range(n):
            if c in pivot_cols:
                particular[unknowns[c]] = b[pivot_cols[c]]
            else:
                particular[unknowns[c]] = ZERO
    kernel = []
    for f in free_cols:
        vec = {unknowns[f]: ONE}
        for c, r in pivot_cols.items():
            e = rows[r][f]
            if not e.is_zero:
                vec[unknowns[c]] = -e
        kernel.append(_clear_denominators(vec) if clear else vec)
    conditions = _dedupe(conditions)
    return LinearSolution(
        unknowns,
        particular,
        kernel,
        conditions,
        inconsistent,
        len(pivots),
        sorted(pivot_cols),
        residuals,
    )


def _dedupe(exprs):
    out = []
    seen = set()
    for e in exprs:
        key = normalize_function(e)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def normalize_function(e: Expr) -> Expr:
    """Constraint-function normal form: numerator with leading coefficient 1."""
    if e.is_zero:
        return e
    num = e.numerator
    lead = min(num.num, key=_lead_key)
    c = num.num[lead]
    return num if c == 1 else num * (ONE / const(c))


def _lead_key(m):
    from varigeo.symexpr.expr import _mono_order

    return _mono_order(m)


@dataclass
class NumericKernel:
    rank: int
    vectors: list  # list of {name: float}
    singular_values: list


def numeric_kernel(matrix, unknowns, point, atom_values=None, tol=1e-10) -> NumericKernel:
    """Pointwise kernel from the SVD of the evaluated matrix."""
    m = np.array(
        [[e.eval(point, atom_values) for e in row] for row in matrix], dtype=float
    ).reshape(len(matrix), len(unknowns))
    if m.size == 0:
        rank = 0
        sv = np.zeros(0)
        null = np.eye(len(unknowns))
    else:
        _, sv, vt = np.linalg.svd(m)
        scale = sv[0] if sv.size and sv[0] > 0 else 1.0
        rank = int(np.sum(sv > tol * scale))
        null = vt[rank:].T
    vectors = [dict(zip(unknowns, map(float, null[:, k]))) for k in range(null.shape[1])]
    return NumericKernel(rank, vectors, [float(s) for s in sv])
