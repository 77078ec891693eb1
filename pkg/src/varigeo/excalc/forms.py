"""Differential forms and vector fields on a single chart.

A degree-k form is a sparse table ``{(i1 < ... < ik): coefficient}`` of
coordinate indices; zero coefficients are never stored, so two forms are equal
exactly when their tables are. Degree-0 forms are plain :class:`Expr` values.
"""

from __future__ import annotations

from varigeo.errors import ChartError
from varigeo.excalc.chart import Chart
from varigeo.symexpr import ONE, ZERO, Expr, const


def _as_scalar(x):
    if isinstance(x, Expr):
        return x
    try:
        return const(x)
    except TypeError:
        return None


def _check_same(a, b):
    if a is not b and a != b:
        raise ChartError("forms or fields live on different charts")


def _merge_sign(i, j):
    """Sorted union of disjoint index tuples and the sign of the sorting permutation."""
    merged = i + j
    # count inversions between the two sorted blocks
    inv = 0
    for a in i:
        for b in j:
            if a > b:
                inv += 1
    return tuple(sorted(merged)), -1 if inv & 1 else 1


class DiffForm:
    __slots__ = ("chart", "degree", "terms", "_hash")

    def __init__(self, chart: Chart, degree: int, terms=None):
        self.chart = chart
        self.degree = degree
        clean = {}
        for idx, c in (terms or {}).items():
            if not c.is_zero:
                clean[tuple(idx)] = c
        self.terms = clean
        self._hash = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, chart, degree):
        return cls(chart, degree, {})

    @classmethod
    def differential(cls, chart, name):
        """The basis 1-form ``d<name>``."""
        return cls(chart, 1, {(chart.index(name),): ONE})

    @classmethod
    def one_form(cls, chart, comps):
        """1-form from ``{coordinate name: coefficient}``."""
        terms = {}
        for n, c in comps.items():
            terms[(chart.index(n),)] = _as_scalar(c)
        return cls(chart, 1, terms)

    # -- queries ---------------------------------------------------------------

    @property
    def is_zero(self):
        return not self.terms

    def coeff(self, *names):
        """Coefficient of ``d<names[0]> ^ d<names[1]> ^ ...`` (antisymmetrized)."""
        idx = [self.chart.index(n) for n in names]
        if len(set(idx)) != len(idx) or len(idx) != self.degree:
            return ZERO
        order = sorted(range(len(idx)), key=lambda k: idx[k])
        sign = _perm_sign(order)
        c = self.terms.get(tuple(sorted(idx)), ZERO)
        return c if sign > 0 else -c

    def coefficients(self):
        """``{(name, ...): Expr}`` keyed by coordinate names."""
        names = self.chart.coordinates
        return {tuple(names[i] for i in idx): c for idx, c in self.terms.items()}

    @property
    def free(self):
        s = set()
        for c in self.terms.values():
            s |= c.free
        return s

    def map_coefficients(self, f):
        return DiffForm(self.chart, self.degree, {i: f(c) for i, c in self.terms.items()})

    def subs(self, mapping):
        return self.map_coefficients(lambda c: c.subs(mapping))

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, DiffForm):
            _check_same(self.chart, other.chart)
            if other.degree != self.degree:
                if self.is_zero:
                    return other
                if other.is_zero:
                    return self
                raise TypeError(f"cannot add forms of degree {self.degree} and {other.degree}")
            terms = dict(self.terms)
            for i, c in other.terms.items():
                terms[i] = terms[i] + c if i in terms else c
            return DiffForm(self.chart, self.degree, terms)
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        if s.is_zero:
            return self
        if self.is_zero and self.degree == 0:
            return s
        raise TypeError(f"cannot add a scalar to a {self.degree}-form")

    __radd__ = __add__

    def __neg__(self):
        return DiffForm(self.chart, self.degree, {i: -c for i, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, DiffForm):
            return self + (-other)
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        return self + (-s)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, DiffForm):
            return wedge(self, other)
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        if s.is_zero:
            return DiffForm.zero(self.chart, self.degree)
        return DiffForm(self.chart, self.degree, {i: c * s for i, c in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        return self * (ONE / s)

    def __xor__(self, other):
        return wedge(self, other)

    def __rxor__(self, other):
        return wedge(other, self)

    def __eq__(self, other):
        if isinstance(other, DiffForm):
            return (
                self.chart == other.chart
                and (self.degree == other.degree or (self.is_zero and other.is_zero))
                and self.terms == other.terms
            )
        if self.is_zero:
            s = _as_scalar(other)
            return s is not None and s.is_zero
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.degree, frozenset(self.terms.items())))
        return self._hash

    # -- printing --------------------------------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        names = self.chart.coordinates
        parts = []
        for idx in sorted(self.terms):
            c = self.terms[idx]
            basis = "^".join("d" + names[i] for i in idx)
            if c == 1:
                t = basis
            elif c == -1:
                t = "-" + basis
            else:
                ct = c.text
                if len(c.num) > 1 or (not c.is_polynomial):
                    ct = f"({ct})"
                t = f"{ct}*{basis}"
            parts.append(t)
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"DiffForm({self.degree}, {self})"

    def to_dict(self):
        return {"^".join(k): v.text for k, v in sorted(self.coefficients().items())}


def _perm_sign(order):
    sign = 1
    seen = [False] * len(order)
    for i in range(len(order)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class VecField:
    """Vector field ``sum X^i d/dx^i``; components stored sparsely by coordinate name."""

    __slots__ = ("chart", "comps", "_hash")

    def __init__(self, chart: Chart, comps=None):
        self.chart = chart
        clean = {}
        for n, c in (comps or {}).items():
            chart.index(n)
            c = _as_scalar(c)
            if c is None:
                raise TypeError("vector field components must be scalars")
            if not c.is_zero:
                clean[n] = c
        self.comps = clean
        self._hash = None

    @classmethod
    def basis(cls, chart, name):
        """Coordinate field d/d<name>."""
        return cls(chart, {name: ONE})

    def __getitem__(self, name):
        return self.comps.get(name, ZERO)

    @property
    def is_zero(self):
        return not self.comps

    def __add__(self, other):
        if not isinstance(other, VecField):
            return NotImplemented
        _check_same(self.chart, other.chart)
        comps = dict(self.comps)
        for n, c in other.comps.items():
            comps[n] = comps[n] + c if n in comps else c
        return VecField(self.chart, comps)

    def __neg__(self):
        return VecField(self.chart, {n: -c for n, c in self.comps.items()})

    def __sub__(self, other):
        if not isinstance(other, VecField):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        return VecField(self.chart, {n: c * s for n, c in self.comps.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        s = _as_scalar(other)
        if s is None:
            return NotImplemented
        return self * (ONE / s)

    def __eq__(self, other):
        if not isinstance(other, VecField):
            return NotImplemented
        return self.chart == other.chart and self.comps == other.comps

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.comps.items()))
        return self._hash

    def __call__(self, f: Expr) -> Expr:
        """Directional derivative X(f)."""
        total = ZERO
        for n, c in self.comps.items():
            if n in f.free:
                total = total + c * f.diff(n)
        return total

    def subs(self, mapping):
        return VecField(self.chart, {n: c.subs(mapping) for n, c in self.comps.items()})

    def __str__(self):
        if not self.comps:
            return "0"
        parts = []
        for n in self.chart.coordinates:
            if n not in self.comps:
                continue
            c = self.comps[n]
            if c == 1:
                parts.append(f"d/d{n}")
            elif c == -1:
                parts.append(f"-d/d{n}")
            else:
                ct = c.text
                if len(c.num) > 1 or not c.is_polynomial:
                    ct = f"({ct})"
                parts.append(f"{ct}*d/d{n}")
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def __repr__(self):
        return f"VecField({self})"

    def to_dict(self):
        return {n: self[n].text for n in self.chart.coordinates}


class CoordMap:
    """Smooth map from ``source`` to ``target`` given by target-coordinate components
    expressed over the source chart."""

    def __init__(self, source: Chart, target: Chart, components):
        self.source = source
        self.target = target
        comps = {}
        for n in target.coordinates:
            if n not in components:
                raise ChartError(f"map lacks a component for target coordinate {n!r}")
            c = _as_scalar(components[n])
            extra = c.free - set(source.coordinates) - set(source.parameters)
            if extra:
                raise ChartError(f"component for {n!r} uses {sorted(extra)} outside the source chart")
            comps[n] = c
        self.components = comps

    @classmethod
    def identity(cls, chart):
        from varigeo.symexpr import sym

        return cls(chart, chart, {n: sym(n) for n in chart.coordinates})


# --------------------------------------------------------------------------
# operations


def wedge(a, b):
    """Exterior product; scalars act by multiplication."""
    if not isinstance(a, DiffForm):
        return b * _as_scalar(a)
    if not isinstance(b, DiffForm):
        return a * _as_scalar(b)
    _check_same(a.chart, b.chart)
    terms = {}
    for i, f in a.terms.items():
        si = set(i)
        for j, g in b.terms.items():
            if si.intersection(j):
                continue
            k, sign = _merge_sign(i, j)
            c = f * g if sign > 0 else -(f * g)
            terms[k] = terms[k] + c if k in terms else c
    return DiffForm(a.chart, a.degree + b.degree, terms)


def ext_d(a, chart: Chart = None):
    """Exterior derivative. Scalars need ``chart`` (or are promoted via a form)."""
    if not isinstance(a, DiffForm):
        if chart is None:
            raise ChartError("exterior derivative of a scalar needs a chart")
        a = _as_scalar(a)
        terms = {}
        for i, n in enumerate(chart.coordinates):
            if n in a.free:
                terms[(i,)] = a.diff(n)
        return DiffForm(chart, 1, terms)
    chart = a.chart
    names = chart.coordinates
    terms = {}
    for idx, f in a.terms.items():
        fr = f.free
        for j, n in enumerate(names):
            if n not in fr or j in idx:
                continue
            below = sum(1 for i in idx if i < j)
            k = tuple(sorted(idx + (j,)))
            c = f.diff(n)
            if below & 1:
                c = -c
            terms[k] = terms[k] + c if k in terms else c
    return DiffForm(chart, a.degree + 1, terms)


def iota(X: VecField, a):
    """Interior product i_X a. Returns an Expr for 1-forms."""
    if not isinstance(a, DiffForm):
        raise TypeError("interior product of a 0-form is undefined")
    if a.degree == 0:
        raise TypeError("interior product of a 0-form is undefined")
    _check_same(X.chart, a.chart)
    names = a.chart.coordinates
    if a.degree == 1:
        total = ZERO
        for (i,), f in a.terms.items():
            x = X.comps.get(names[i])
            if x is not None:
                total = total + f * x
        return total
    terms = {}
    for idx, f in a.terms.items():
        for pos, i in enumerate(idx):
            x = X.comps.get(names[i])
            if x is None:
                continue
            k = idx[:pos] + idx[pos + 1 :]
            c = f * x
            if pos & 1:
                c = -c
            terms[k] = terms[k] + c if k in terms else c
    return DiffForm(a.chart, a.degree - 1, terms)


def lie(X: VecField, a):
    """Lie derivative by the coordinate formula (Leibniz rule on f dx^I with L_X dx^i = dX^i)."""
    if not isinstance(a, DiffForm):
        return X(_as_scalar(a))
    chart = a.chart
    _check_same(X.chart, chart)
    names = chart.coordinates
    dX = {}
    result = DiffForm.zero(chart, a.degree)
    for idx, f in a.terms.items():
        result = result + DiffForm(chart, a.degree, {idx: X(f)})
        for pos, i in enumerate(idx):
            n = names[i]
            if n not in dX:
                dX[n] = ext_d(X[n], chart)
            if dX[n].is_zero:
                continue
            factors = [
                dX[n] if p == pos else DiffForm(chart, 1, {(j,): ONE}) for p, j in enumerate(idx)
            ]
            prod = factors[0]
            for g in factors[1:]:
                prod = wedge(prod, g)
            result = result + prod * f
    return result


def pullback(m: CoordMap, a):
    """Pull a form (or scalar) on ``m.target`` back to ``m.source``."""
    if not isinstance(a, DiffForm):
        return _as_scalar(a).subs(m.components)
    _check_same(a.chart, m.target)
    src = m.source
    names = m.target.coordinates
    dcomp = {}
    result = DiffForm.zero(src, a.degree)
    for idx, f in a.terms.items():
        prod = f.subs(m.components)
        for i in idx:
            n = names[i]
            if n not in dcomp:
                dcomp[n] = ext_d(m.components[n], src)
            prod = wedge(prod, dcomp[n]) if isinstance(prod, DiffForm) else dcomp[n] * prod
        result = result + prod
    return result


def lift(a, chart: Chart):
    """Re-express a form over a chart containing all of its coordinates."""
    if not isinstance(a, DiffForm):
        return a
    names = a.chart.coordinates
    terms = {}
    for idx, f in a.terms.items():
        new = [chart.index(names[i]) for i in idx]
        order = sorted(range(len(new)), key=lambda k: new[k])
        c = f if _perm_sign(order) > 0 else -f
        terms[tuple(sorted(new))] = c
    return DiffForm(chart, a.degree, terms)


def coordinate_form(chart, name):
    return DiffForm.differential(chart, name)


def top_wedge(forms):
    """Wedge of a list of forms, left to right."""
    forms = list(forms)
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out
