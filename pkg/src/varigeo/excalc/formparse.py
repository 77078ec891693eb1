"""Form literals: the scalar grammar plus ``d<coord>``, ``^`` as wedge, and ``d(...)``."""

from __future__ import annotations

from varigeo.errors import ParseError
from varigeo.excalc.forms import DiffForm, ext_d, wedge
from varigeo.symexpr import Expr, FormHooks, parse_expr


class _Hooks(FormHooks):
    def __init__(self, chart):
        self.chart = chart

    def differential(self, coordinate):
        return DiffForm.differential(self.chart, coordinate)

    def is_form(self, value):
        return isinstance(value, DiffForm)

    def wedge(self, a, b):
        return wedge(a, b)

    def ext_d(self, value):
        return ext_d(value, self.chart)


def parse_form(src: str, chart, degree=None):
    """Parse a form literal such as ``"ds - s*dq"`` or ``"dt^dq"``.

    A scalar result is returned as an :class:`Expr` (degree 0). ``degree``, when
    given, is checked.
    """
    value = parse_expr(src, chart, hooks=_Hooks(chart))
    got = value.degree if isinstance(value, DiffForm) else 0
    if isinstance(value, DiffForm) and value.is_zero and degree is not None:
        return DiffForm.zero(chart, degree)
    if isinstance(value, Expr) and value.is_zero and degree:
        return DiffForm.zero(chart, degree)
    if degree is not None and got != degree:
        raise ParseError(f"expected a {degree}-form, got a {got}-form: {src!r}")
    return value
