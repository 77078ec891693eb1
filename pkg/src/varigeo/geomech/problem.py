"""Geometric variational problems: a 2-form, constraint forms and a variation class."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from varigeo.errors import ChartError
from varigeo.excalc import DiffForm, ext_d


class VariationClass(enum.Enum):
    ALL_FIELDS = "AllFields"
    VERTICAL = "Vertical"
    ADMISSIBLE_REDUCED = "AdmissibleReduced"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text):
        for v in cls:
            if v.value.lower() == str(text).lower():
                return v
        raise ValueError(f"unknown variation class {text!r}")


@dataclass
class ConstraintSet:
    """Function constraints ``I0``, nonholonomic forms ``I1nh`` and vakonomic forms ``I1vak``."""

    I0: list = field(default_factory=list)
    I1nh: list = field(default_factory=list)
    I1vak: list = field(default_factory=list)

    def forms(self):
        return list(self.I1nh) + list(self.I1vak)

    def check_chart(self, chart):
        for f in self.forms():
            if f.chart != chart:
                raise ChartError("constraint form lives on another chart")
            if f.degree != 1:
                raise ChartError("constraint forms must be 1-forms")


def lift_function_constraints(I0, chart, I1nh=()):
    """Keep ``I0`` and append ``df`` for each ``f`` in it to the nonholonomic forms."""
    added = [ext_d(f, chart) for f in I0]
    added = [a for a in added if not a.is_zero]
    return list(I0), list(I1nh) + added


@dataclass
class GVProblem:
    chart: object
    omega: DiffForm
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    variation: VariationClass = VariationClass.VERTICAL
    provenance: str = ""

    def __post_init__(self):
        if self.omega.degree != 2 and not self.omega.is_zero:
            raise ChartError("the problem form must be a 2-form")
        if self.omega.chart != self.chart:
            raise ChartError("the problem form lives on another chart")
        self.chart.require_time()
        self.constraints.check_chart(self.chart)

    def with_omega(self, omega, provenance=None):
        return GVProblem(self.chart, omega, self.constraints, self.variation,
                         provenance if provenance is not None else self.provenance)

    def with_variation(self, variation):
        return GVProblem(self.chart, self.omega, self.constraints, variation, self.provenance)
