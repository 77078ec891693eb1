"""Role-tagged coordinate charts."""

from __future__ import annotations

from dataclasses import dataclass, field

from varigeo.errors import ChartError
from varigeo.symexpr import FUNCTIONS

ROLES = (
    "time",
    "position",
    "velocity",
    "action",
    "auxiliary",
    "momentum",
    "action_momentum",
)

_RESERVED = set(FUNCTIONS) | {"diff", "d"}


@dataclass(frozen=True)
class Chart:
    """Ordered coordinates with roles, plus parameters and abstract functions.

    ``functions`` is a tuple of ``(name, argument names)`` pairs; arguments must
    be coordinates. The order of ``coordinates`` fixes the basis order of forms.
    """

    coordinates: tuple
    roles: tuple
    parameters: tuple = ()
    functions: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        coords = tuple(self.coordinates)
        roles = tuple(self.roles)
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "parameters", tuple(self.parameters))
        funcs = self.functions
        if isinstance(funcs, dict):
            funcs = funcs.items()
        funcs = tuple((n, tuple(a)) for n, a in funcs)
        object.__setattr__(self, "functions", funcs)
        if len(coords) != len(roles):
            raise ChartError("every coordinate needs exactly one role")
        names = list(coords) + list(self.parameters) + [n for n, _ in funcs]
        seen = set()
        for n in names:
            if not isinstance(n, str) or not n.isidentifier():
                raise ChartError(f"invalid name {n!r}")
            if n in seen:
                raise ChartError(f"duplicate name {n!r}")
            if n in _RESERVED:
                raise ChartError(f"{n!r} is a reserved word")
            seen.add(n)
        for n in names:
            if n.startswith("d") and n[1:] in coords:
                raise ChartError(f"{n!r} clashes with the differential of coordinate {n[1:]!r}")
        for r in roles:
            if r not in ROLES:
                raise ChartError(f"unknown role {r!r}; expected one of {', '.join(ROLES)}")
        if roles.count("time") > 1:
            raise ChartError("at most one time coordinate is allowed")
        for n, args in funcs:
            for a in args:
                if a not in coords:
                    raise ChartError(f"argument {a!r} of function {n!r} is not a coordinate")
            if len(set(args)) != len(args):
                raise ChartError(f"arguments of function {n!r} must be distinct")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(coords)})

    @classmethod
    def build(cls, spec, parameters=(), functions=()):
        """``Chart.build([("t", "time"), ("q", "position"), ...])``."""
        spec = list(spec)
        return cls(tuple(n for n, _ in spec), tuple(r for _, r in spec), parameters, functions)

    @property
    def dim(self):
        return len(self.coordinates)

    @property
    def function_map(self):
        return dict(self.functions)

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise ChartError(f"{name!r} is not a coordinate of this chart") from None

    def __contains__(self, name):
        return name in self._index

    def role(self, name):
        return self.roles[self.index(name)]

    def with_role(self, role):
        return tuple(n for n, r in zip(self.coordinates, self.roles) if r == role)

    @property
    def time(self):
        t = self.with_role("time")
        return t[0] if t else None

    def require_time(self):
        if self.time is None:
            raise ChartError("this construction needs a time coordinate")
        return self.time

    def extend(self, spec, functions=()):
        """New chart with extra ``(name, role)`` coordinates appended."""
        spec = list(spec)
        return Chart(
            self.coordinates + tuple(n for n, _ in spec),
            self.roles + tuple(r for _, r in spec),
            self.parameters,
            self.functions + tuple(functions),
        )

    def to_dict(self):
        return {
            "coordinates": [{"name": n, "role": r} for n, r in zip(self.coordinates, self.roles)],
            "parameters": list(self.parameters),
            "functions": {n: list(a) for n, a in self.functions},
        }
