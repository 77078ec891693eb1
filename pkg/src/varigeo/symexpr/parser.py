"""Pratt parser for the scalar expression grammar (see docs/grammar.md).

The same parser serves the form-literal grammar: a :class:`FormHooks` object
turns ``d<coord>`` tokens into 1-forms, ``^`` between forms into wedge and the
call ``d(...)`` into the exterior derivative. Without hooks those are errors.
"""

from __future__ import annotations

import re

from gmpy2 import mpq

from varigeo.errors import ParseError
from varigeo.symexpr.expr import FUNCTIONS, Expr, apply, const, sym, ufun

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class Scope:
    """Names visible to the parser: coordinates, parameters and abstract functions.

    ``functions`` maps a function name to the tuple of coordinate names it depends on.
    """

    def __init__(self, coordinates=(), parameters=(), functions=None):
        self.coordinates = tuple(coordinates)
        self.parameters = tuple(parameters)
        self.functions = dict(functions or {})

    @classmethod
    def of(cls, obj):
        if isinstance(obj, Scope):
            return obj
        if obj is None:
            return cls()
        if hasattr(obj, "coordinates") and hasattr(obj, "parameters"):
            return cls(obj.coordinates, obj.parameters, getattr(obj, "functions", None))
        return cls(tuple(obj))

    @property
    def symbols(self):
        return set(self.coordinates) | set(self.parameters)


def tokenize(src):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src, scope, hooks):
        self.src = src
        self.scope = scope
        self.hooks = hooks
        self.tokens = tokenize(src)
        self.i = 0
        self.symbols = scope.symbols

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.advance()
        if kind == "end" or value != text:
            shown = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {shown}", pos, self.src)

    def error(self, msg, pos):
        return ParseError(msg, pos, self.src)

    def parse(self):
        value = self.expression(0)
        kind, text, pos = self.peek()
        if kind != "end":
            raise self.error(f"unexpected {text!r}", pos)
        return value

    def expression(self, rbp):
        left = self.prefix()
        while True:
            kind, text, pos = self.peek()
            if kind != "op" or text not in _BINARY:
                return left
            lbp = _BINARY[text]
            if lbp <= rbp:
                return left
            self.advance()
            if text == "^":
                # right associative
                right = self.expression(lbp - 1)
                left = self.power(left, right, pos)
            else:
                right = self.expression(lbp)
                left = self.binary(text, left, right, pos)

    def binary(self, op, a, b, pos):
        try:
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            return self.divide(a, b, pos)
        except TypeError as exc:
            raise self.error(str(exc), pos) from None

    def divide(self, a, b, pos):
        if not isinstance(b, Expr):
            raise self.error("cannot divide by a differential form", pos)
        if b.is_zero:
            raise self.error("division by zero", pos)
        return a / b

    def power(self, base, exponent, pos):
        hooks = self.hooks
        if hooks is not None and (hooks.is_form(base) or hooks.is_form(exponent)):
            return hooks.wedge(base, exponent)
        if not exponent.is_constant:
            raise self.error(f"exponent {exponent} is not a rational constant", pos)
        if base.is_zero and exponent.value < 0:
            raise self.error("zero raised to a negative power", pos)
        return base ** exponent.value

    def prefix(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return const(mpq(text))
        if kind == "op" and text == "-":
            return -self.expression(_UNARY_BP)
        if kind == "op" and text == "+":
            return self.expression(_UNARY_BP)
        if kind == "op" and text == "(":
            value = self.expression(0)
            self.expect(")")
            return value
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(text, pos)
            return self.identifier(text, pos)
        shown = "end of input" if kind == "end" else repr(text)
        raise self.error(f"unexpected {shown}", pos)

    def identifier(self, name, pos):
        if name in self.symbols:
            return sym(name)
        if name in self.scope.functions:
            return ufun(name, self.scope.functions[name])
        if name.startswith("d") and name[1:] in self.scope.coordinates:
            if self.hooks is None:
                raise self.error(f"{name!r} is not a scalar identifier in expression context", pos)
            return self.hooks.differential(name[1:])
        if name in FUNCTIONS or name == "diff":
            raise self.error(f"function {name!r} used without arguments", pos)
        raise self.error(f"unknown identifier {name!r}", pos)

    def arguments(self):
        self.expect("(")
        args = []
        if self.peek()[1] == ")":
            self.advance()
            return args
        while True:
            args.append((self.peek()[2], self.expression(0)))
            kind, text, pos = self.advance()
            if text == ")":
                return args
            if text != ",":
                shown = "end of input" if kind == "end" else repr(text)
                raise self.error(f"expected ',' or ')', found {shown}", pos)

    def call(self, name, pos):
        args = self.arguments()
        if name in FUNCTIONS:
            if len(args) != 1:
                raise self.error(f"{name} expects 1 argument, got {len(args)}", pos)
            arg = args[0][1]
            if not isinstance(arg, Expr):
                raise self.error(f"{name} of a differential form", args[0][0])
            try:
                return apply(name, arg)
            except ArithmeticError as exc:
                raise self.error(str(exc), pos) from None
        if name == "diff":
            if len(args) < 2:
                raise self.error("diff expects an expression and at least one coordinate", pos)
            value = args[0][1]
            for apos, x in args[1:]:
                xname = _symbol_name(x)
                if xname is None or xname not in self.symbols:
                    raise self.error("diff variables must be coordinates or parameters", apos)
                value = value.diff(xname)
            return value
        if name == "d" and self.hooks is not None:
            if len(args) != 1:
                raise self.error(f"d expects 1 argument, got {len(args)}", pos)
            return self.hooks.ext_d(args[0][1])
        if name in self.scope.functions:
            declared = self.scope.functions[name]
            names = []
            for apos, x in args:
                xname = _symbol_name(x)
                if xname is None or xname not in self.scope.coordinates:
                    raise self.error(f"arguments of {name} must be coordinates", apos)
                names.append(xname)
            if len(names) != len(declared):
                raise self.error(
                    f"{name} expects {len(declared)} arguments, got {len(names)}", pos
                )
            if len(set(names)) != len(names):
                raise self.error(f"arguments of {name} must be distinct", pos)
            return ufun(name, names)
        if name in self.symbols:
            raise self.error(f"{name!r} is not a function", pos)
        raise self.error(f"unknown function {name!r}", pos)


def _symbol_name(e):
    if not isinstance(e, Expr) or len(e.num) != 1 or not e.is_polynomial:
        return None
    ((mono, c),) = e.num.items()
    if c != 1 or len(mono) != 1 or mono[0][1] != 1:
        return None
    atom = mono[0][0]
    return getattr(atom, "name", None) if atom.key[0] == 0 else None


def parse_expr(src, scope=None, hooks=None) -> Expr:
    """Parse ``src`` into a canonical :class:`Expr`.

    ``scope`` is a Chart, a :class:`Scope`, or an iterable of symbol names.
    """
    if not isinstance(src, str):
        raise ParseError(f"expected expression text, got {type(src).__name__}")
    value = _Parser(src, Scope.of(scope), hooks).parse()
    if hooks is None and not isinstance(value, Expr):
        raise ParseError("expression did not evaluate to a scalar", 0, src)
    return value


class FormHooks:
    """Interface the form-literal grammar plugs into the parser."""

    def differential(self, coordinate):
        raise NotImplementedError

    def is_form(self, value):
        raise NotImplementedError

    def wedge(self, a, b):
        raise NotImplementedError

    def ext_d(self, value):
        raise NotImplementedError
