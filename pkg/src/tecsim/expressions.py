"""Tiny arithmetic expression language for scenario files.

Grammar (usual precedence, ``^`` binds tightest and right-associates):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Recognized functions: ``abs``, ``exp``, ``cos``, ``sin`` (one argument) and
``min``, ``max`` (two or more).  ``pi`` is the only constant.  Which variable
names are legal depends on where the expression appears (coefficients see
state components, boundary data sees time, initial data sees space only);
anything else is rejected at parse time with its position.

Expressions compile to closures over numpy, so evaluation is vectorized and
no Python code from the config file is ever executed.
"""

from __future__ import annotations

import math
import re
from typing import Callable, Sequence

import numpy as np

from .errors import ExpressionParseError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_UNARY_FUNCS = {
    "abs": np.abs,
    "exp": np.exp,
    "cos": np.cos,
    "sin": np.sin,
}
_VARIADIC_FUNCS = {
    "min": lambda args: np.minimum.reduce(args),
    "max": lambda args: np.maximum.reduce(args),
}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExpressionParseError(
                f"unexpected character {text[pos]!r} at position {pos}", pos
            )
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExpressionParseError(f"expected {op!r} at position {pos}", pos)

    def parse(self) -> Callable:
        fn = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionParseError(f"trailing input {val!r} at position {pos}", pos)
        return fn

    def expr(self):
        left = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                right = self.term()
                left = (
                    (lambda a, b: lambda env: a(env) + b(env))
                    if val == "+"
                    else (lambda a, b: lambda env: a(env) - b(env))
                )(left, right)
            else:
                return left

    def term(self):
        left = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                right = self.unary()
                left = (
                    (lambda a, b: lambda env: a(env) * b(env))
                    if val == "*"
                    else (lambda a, b: lambda env: a(env) / b(env))
                )(left, right)
            else:
                return left

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        return self.power()

    def power(self):
        base = self.primary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exponent = self.unary()
            return lambda env: np.power(base(env), exponent(env))
        return base

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            const = float(val)
            return lambda env: const
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        if kind == "name":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                return self.call(val, pos)
            if val == "pi":
                return lambda env: math.pi
            if val not in self.variables:
                raise ExpressionParseError(
                    f"unknown name {val!r} at position {pos} "
                    f"(allowed here: {', '.join(sorted(self.variables))}, pi)",
                    pos,
                )
            return lambda env, name=val: env[name]
        raise ExpressionParseError(f"unexpected token at position {pos}", pos)

    def call(self, name, pos):
        self.expect_op("(")
        args = [self.expr()]
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == ",":
                self.take()
                args.append(self.expr())
            else:
                break
        self.expect_op(")")
        if name in _UNARY_FUNCS:
            if len(args) != 1:
                raise ExpressionParseError(
                    f"{name} takes exactly one argument (at position {pos})", pos
                )
            fn, arg = _UNARY_FUNCS[name], args[0]
            return lambda env: fn(arg(env))
        if name in _VARIADIC_FUNCS:
            if len(args) < 2:
                raise ExpressionParseError(
                    f"{name} needs at least two arguments (at position {pos})", pos
                )
            fn = _VARIADIC_FUNCS[name]
            return lambda env: fn([a(env) for a in args])
        raise ExpressionParseError(
            f"unknown function {name!r} at position {pos} "
            f"(available: abs, exp, cos, sin, min, max)",
            pos,
        )


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    """Compile ``text`` to ``f(env_dict) -> value`` over the given variables."""
    if not isinstance(text, str):
        raise ExpressionParseError(f"expected an expression string, got {text!r}")
    return _Parser(text, variables).parse()


def spatial_function(text: str):
    """Compile to ``f(x, y)`` (initial data, surface current)."""
    fn = compile_expression(text, ("x", "y"))
    return lambda x, y: fn({"x": x, "y": y})


def boundary_data_function(text: str):
    """Compile to ``f(x, y, t)`` (time-dependent boundary data)."""
    fn = compile_expression(text, ("x", "y", "t"))
    return lambda x, y, t: fn({"x": x, "y": y, "t": t})


def coefficient_function(text: str, n_state: int):
    """Compile to ``f(x, y, e_tuple)`` for the full-state coefficients.

    ``e1 .. e<n_state>`` are the state components (species first, temperature
    last); ``e`` aliases the temperature.
    """
    names = tuple(f"e{i + 1}" for i in range(n_state))
    fn = compile_expression(text, ("x", "y", "e") + names)

    def coeff(x, y, e):
        env = {"x": x, "y": y, "e": e[n_state - 1]}
        for i in range(n_state):
            env[names[i]] = e[i]
        return fn(env)

    return coeff


def scalar_state_function(text: str):
    """Compile to ``f(x, y, e)`` with a single scalar state (b, gamma)."""
    fn = compile_expression(text, ("x", "y", "e"))
    return lambda x, y, e: fn({"x": x, "y": y, "e": e})
