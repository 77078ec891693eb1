"""Exterior calculus on a single role-tagged coordinate chart."""

from varigeo.excalc.chart import ROLES, Chart
from varigeo.excalc.formparse import parse_form
from varigeo.excalc.forms import (
    CoordMap,
    DiffForm,
    VecField,
    ext_d,
    iota,
    lie,
    lift,
    pullback,
    top_wedge,
    wedge,
)
from varigeo.excalc.kernel import contraction_rows, kernel_basis, rank_of, solve_contractions
from varigeo.excalc.linalg import (
    LinearSolution,
    NumericKernel,
    normalize_function,
    numeric_kernel,
    rref,
    solve_linear,
)

__all__ = [
    "ROLES", "Chart", "parse_form", "CoordMap", "DiffForm", "VecField", "ext_d", "iota",
    "lie", "lift", "pullback", "top_wedge", "wedge", "contraction_rows", "kernel_basis",
    "rank_of", "solve_contractions", "LinearSolution", "NumericKernel", "normalize_function",
    "numeric_kernel", "rref", "solve_linear",
]
