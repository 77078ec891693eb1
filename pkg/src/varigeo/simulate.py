"""Numeric integration of solved vector fields and invariant monitoring.

Fields are compiled from their canonical expressions to plain Python with the
``math`` module, integrated with fixed-step classical RK4, and monitored
along the trajectory. Constraint drift of a 1-form ``alpha`` is the cumulative
line integral of ``alpha`` along the piecewise cubic Hermite interpolant of
the discrete trajectory (endpoint slopes from the field), computed with
3-point Gauss-Legendre quadrature per step; it vanishes for exact solutions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from varigeo.errors import DomainError, InitialConditionError, SingularLocusError
from varigeo.excalc import DiffForm, VecField
from varigeo.symexpr import Expr, const
from varigeo.symexpr.expr import _real_root

_GL_NODES = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


def _names(chart, params):
    names = {n: f"x[{i}]" for i, n in enumerate(chart.coordinates)}
    for p, v in (params or {}).items():
        names[p] = repr(float(v))
    return names


def _vroot(b, q):
    b = np.asarray(b, dtype=float)
    return np.sign(b) * np.abs(b) ** (1.0 / q) if q % 2 else np.sqrt(b) ** (2.0 / q)


def _compile_exprs(exprs, chart, params, label, vectorized=False):
    """One function ``x -> list of floats`` evaluating every expression.

    With ``vectorized`` the function takes the transposed state array and
    returns an array of shape ``(len(exprs), n_states)``.
    """
    names = _names(chart, params)
    missing = set()
    for e in exprs:
        missing |= e.free - set(names)
    if missing:
        raise DomainError(f"{label} needs values for {', '.join(sorted(missing))}")
    body = ", ".join(e.pycode(names) for e in exprs)
    if vectorized:
        src = f"def _f(x):\n    return np.array(np.broadcast_arrays({body}, x[0]))[:-1]\n"
        scope = {"math": np, "np": np, "_root": _vroot}
    else:
        src = f"def _f(x):\n    return [{body}]\n"
        scope = {"math": math, "_root": _real_root}
    exec(compile(src, f"<compiled {label}>", "exec"), scope)
    return scope["_f"], src


class RHS:
    """Compiled right-hand side ``x -> Z(x)`` on ``chart`` (coordinate order)."""

    def __init__(self, Z: VecField, params=None):
        self.Z = Z
        self.chart = Z.chart
        self.params = dict(params or {})
        self.exprs = [Z[n] for n in self.chart.coordinates]
        self._f, self.source = _compile_exprs(self.exprs, self.chart, self.params, "field")

    def __call__(self, x):
        # plain floats so that division by zero raises instead of returning inf
        xs = [float(c) for c in x]
        try:
            out = self._f(xs)
        except (ZeroDivisionError, ValueError, OverflowError, DomainError) as exc:
            raise SingularLocusError(f"field undefined at state {self.state_dict(x)}: {exc}",
                                     state=self.state_dict(x)) from exc
        out = np.array(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise SingularLocusError(f"field not finite at state {self.state_dict(x)}",
                                     state=self.state_dict(x))
        return out

    def state_dict(self, x):
        return {n: float(v) for n, v in zip(self.chart.coordinates, x)}

    def symbolic(self, x):
        """Reference evaluation through ``Expr.eval`` (for agreement checks)."""
        point = self.state_dict(x)
        point.update({k: float(v) for k, v in self.params.items()})
        return np.array([e.eval(point) for e in self.exprs])


def compile_field(Z: VecField, params=None) -> RHS:
    return RHS(Z, params)


class ScalarFn:
    """Compiled scalar function on a chart."""

    def __init__(self, e: Expr, chart, params=None):
        self.expr = e
        self.chart = chart
        self.params = params
        self._f, _ = _compile_exprs([e], chart, params, str(e))
        self._v = None

    def __call__(self, x):
        return self._f(x)[0]

    def many(self, states):
        """Values at every row of ``states``."""
        if self._v is None:
            self._v, _ = _compile_exprs([self.expr], self.chart, self.params, str(self.expr),
                                        vectorized=True)
        with np.errstate(all="ignore"):
            return self._v(np.asarray(states, dtype=float).T)[0]


class CovectorFn:
    """Compiled 1-form: ``x -> coefficient vector`` in coordinate order."""

    def __init__(self, form: DiffForm, params=None):
        chart = form.chart
        self.form = form
        exprs = [form.coeff(n) for n in chart.coordinates]
        self._f, _ = _compile_exprs(exprs, chart, params, str(form))
        self._v, _ = _compile_exprs(exprs, chart, params, str(form), vectorized=True)

    def __call__(self, x):
        return np.array(self._f(x), dtype=float)

    def many(self, states):
        """Coefficient rows at every row of ``states``; shape ``(n_states, dim)``."""
        with np.errstate(all="ignore"):
            return self._v(np.asarray(states, dtype=float).T).T


@dataclass
class Trajectory:
    chart: object
    times: np.ndarray
    states: np.ndarray
    slopes: np.ndarray
    h: float
    monitors: dict = field(default_factory=dict)

    def column(self, name):
        if name in self.monitors:
            return self.monitors[name]
        return self.states[:, self.chart.index(name)]

    def to_csv(self, path_or_file):
        header = list(self.chart.coordinates) + list(self.monitors)
        cols = [self.states[:, i] for i in range(self.states.shape[1])]
        cols += [np.asarray(v) for v in self.monitors.values()]

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.times)):
                w.writerow(["%.17g" % c[k] for c in cols])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)


@dataclass
class InitialConstraints:
    """Function constraints ``I0`` (projected) and 1-forms the field must annihilate."""

    functions: list = field(default_factory=list)
    forms: list = field(default_factory=list)


def _check_initial(rhs: RHS, x0, cons: InitialConstraints, params, tol=1e-10, project_tol=1e-6):
    chart = rhs.chart
    x = np.array(x0, dtype=float)
    if cons.functions:
        fs = [ScalarFn(f, chart, params) for f in cons.functions]
        grads = [[ScalarFn(f.diff(n), chart, params) for n in chart.coordinates]
                 for f in cons.functions]
        vals = np.array([f(x) for f in fs])
        worst = float(np.max(np.abs(vals)))
        if worst > project_tol:
            raise InitialConditionError(
                f"initial state violates I0 by {worst:.3g} (> {project_tol:g}); not projecting")
        if worst > tol:
            J = np.array([[g(x) for g in row] for row in grads])
            x = x - np.linalg.pinv(J) @ vals
            vals = np.array([f(x) for f in fs])
            worst = float(np.max(np.abs(vals)))
            if worst > tol:
                raise InitialConditionError(
                    f"projection onto I0 left a residual of {worst:.3g}")
    z = rhs(x)
    for form in cons.forms:
        a = CovectorFn(form, params)(x)
        r = float(a @ z)
        if abs(r) > tol:
            raise InitialConditionError(
                f"field does not annihilate {form} at the initial state (residual {r:.3g})")
    return x


def integrate(rhs: RHS, x0, t_span, h, constraints: InitialConstraints | None = None
              ) -> Trajectory:
    """Classical RK4 with fixed step ``h`` over ``t_span`` (length or ``(t0, t1)``).

    ``x0`` is a mapping name -> value covering the chart; the time coordinate,
    if present, defaults to ``t0``.
    """
    chart = rhs.chart
    if not h > 0:
        raise ValueError("step h must be positive")
    if isinstance(t_span, (tuple, list)):
        t0, t1 = float(t_span[0]), float(t_span[1])
    else:
        t0, t1 = None, float(t_span)
    tname = chart.time
    x0 = dict(x0)
    if t0 is None:
        t0 = float(x0.get(tname, 0.0)) if tname else 0.0
        t1 = t0 + t1
    if tname is not None:
        x0.setdefault(tname, t0)
    missing = [n for n in chart.coordinates if n not in x0]
    if missing:
        raise InitialConditionError("initial state misses " + ", ".join(missing))
    steps = int(round((t1 - t0) / h))
    if steps <= 0 or abs(steps * h - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError(f"span {t1 - t0} is not a positive multiple of h = {h}")
    x = np.array([float(x0[n]) for n in chart.coordinates])
    x = _check_initial(rhs, x, constraints or InitialConstraints(), rhs.params)
    dim = len(x)
    states = np.empty((steps + 1, dim))
    slopes = np.empty((steps + 1, dim))
    times = t0 + h * np.arange(steps + 1)
    states[0] = x
    k1 = rhs(x)
    slopes[0] = k1
    for n in range(steps):
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SingularLocusError(f"non-finite state after step {n + 1}",
                                     state=rhs.state_dict(x))
        states[n + 1] = x
        k1 = rhs(x)
        slopes[n + 1] = k1
    return Trajectory(chart, times, states, slopes, h)


# --------------------------------------------------------------------------
# monitors


@dataclass
class MonitorSpec:
    """Named channels: scalar Exprs (pointwise values) or 1-forms (cumulative drift)."""

    channels: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def add(self, name, obj):
        self.channels[name] = obj
        return self


def form_drift(traj: Trajectory, form: DiffForm, params=None) -> np.ndarray:
    """Cumulative ``int alpha`` along the Hermite interpolant of ``traj``."""
    a = CovectorFn(form, params)
    h = traj.h
    x0, x1 = traj.states[:-1], traj.states[1:]
    m0, m1 = traj.slopes[:-1], traj.slopes[1:]
    step = np.zeros(len(x0))
    for node, w in zip(_GL_NODES, _GL_WEIGHTS):
        s = 0.5 * (node + 1.0)
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        d00 = 6 * s**2 - 6 * s
        d10 = 3 * s**2 - 4 * s + 1
        d01 = -6 * s**2 + 6 * s
        d11 = 3 * s**2 - 2 * s
        p = h00 * x0 + h10 * h * m0 + h01 * x1 + h11 * h * m1
        dp = (d00 * x0 + d01 * x1) / h + d10 * m0 + d11 * m1
        step += w * np.einsum("ij,ij->i", a.many(p), dp)
    out = np.zeros(len(traj.times))
    out[1:] = np.cumsum(0.5 * h * step)
    return out


def evaluate_channel(traj: Trajectory, obj, params=None) -> np.ndarray:
    if isinstance(obj, DiffForm):
        if obj.degree != 1:
            raise TypeError("monitor forms must be 1-forms")
        return form_drift(traj, obj, params)
    e = obj if isinstance(obj, Expr) else const(obj)
    return ScalarFn(e, traj.chart, params).many(traj.states)


def monitor(traj: Trajectory, spec: MonitorSpec) -> dict:
    """Attach every channel to ``traj`` and return the per-channel max ``|residual|``."""
    report = {}
    for name, obj in spec.channels.items():
        series = evaluate_channel(traj, obj, spec.params)
        traj.monitors[name] = series
        report[name] = float(np.max(np.abs(series))) if len(series) else 0.0
    return report


__all__ = [
    "RHS", "CovectorFn", "InitialConstraints", "MonitorSpec", "ScalarFn", "Trajectory",
    "compile_field", "evaluate_channel", "form_drift", "integrate", "monitor",
]
