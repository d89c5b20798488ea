#!/usr/bin/env python3
"""Arithmetic expressions for diffusivity laws: lexer, AST, parser, evaluator."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .constants import QUADRATURE_ORDER, QUADRATURE_PANELS, QUADRATURE_TOL
from .errors import DomainError, ParseError, UnboundVariable
from .utils import format_decimal

Value = Union[float, np.ndarray]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><->|->|<-|\*\*|[-+*/^(),;:=\[\]])
    """,
    re.VERBOSE,
)

FUNCTIONS = frozenset(("exp", "min", "max"))
_SPATIAL = frozenset(("x1", "x2", "x3"))
_CONC_RE = re.compile(r"c([1-9][0-9]*)$")


@dataclass(frozen=True)
class Token:
    """Lexical token with a 1-based source position."""
    kind: str  # num | ident | op | eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    """Split source text into tokens, dropping whitespace and '#' comments."""
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError("unexpected character", line, pos - line_start + 1, text[pos])
        kind = match.lastgroup
        chunk = match.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = match.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# AST nodes -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Exp:
    operand: "Expr"


@dataclass(frozen=True)
class Min:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Max:
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Min, Max]

_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div}


def is_concentration(name: str) -> Optional[int]:
    """Return the 1-based species index of a 'c<i>' variable, else None."""
    match = _CONC_RE.match(name)
    return int(match.group(1)) if match else None


def _default_identifier_check(name: str) -> bool:
    return name == "t" or name in _SPATIAL or is_concentration(name) is not None


class ExpressionParser:
    """Recursive-descent parser over a shared token stream.

    Grammar (lowest precedence first)::

        expr  = term { ("+" | "-") term }
        term  = unary { ("*" | "/") unary }
        unary = ("-" | "+") unary | power
        power = atom [ ("^" | "**") unary ]
        atom  = number | variable | func "(" expr { "," expr } ")" | "(" expr ")"
    """

    def __init__(self, tokens: list[Token], pos: int = 0,
                 identifier_ok: Callable[[str], bool] = _default_identifier_check):
        self.tokens = tokens
        self.pos = pos
        self.identifier_ok = identifier_ok

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.peek()
        return ParseError(message, token.line, token.column, token.text or "<end of input>")

    def expect_op(self, text: str) -> Token:
        token = self.peek()
        if token.kind != "op" or token.text != text:
            raise self.error(f"expected '{text}'")
        return self.advance()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.advance().text
            node = _BINARY[op](node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.advance().text
            node = _BINARY[op](node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        token = self.peek()
        if token.kind == "op" and token.text == "-":
            self.advance()
            return Neg(self.parse_unary())
        if token.kind == "op" and token.text == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text in ("^", "**"):
            self.advance()
            return Pow(base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        token = self.peek()
        if token.kind == "num":
            self.advance()
            return Num(Fraction(token.text))
        if token.kind == "ident":
            self.advance()
            if token.text in FUNCTIONS:
                return self._parse_call(token)
            if not self.identifier_ok(token.text):
                raise self.error(f"unknown identifier '{token.text}'", token)
            return Var(token.text)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise self.error("expected a number, variable or '('")

    def _parse_call(self, name: Token) -> Expr:
        self.expect_op("(")
        args = [self.parse_expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.parse_expr())
        self.expect_op(")")
        if name.text == "exp":
            if len(args) != 1:
                raise self.error("exp takes exactly one argument", name)
            return Exp(args[0])
        if len(args) < 2:
            raise self.error(f"{name.text} takes at least two arguments", name)
        node_cls = Min if name.text == "min" else Max
        node = node_cls(args[0], args[1])
        for extra in args[2:]:
            node = node_cls(node, extra)
        return node


def parse_expression(text: str, n_species: Optional[int] = None) -> Expr:
    """Parse a standalone arithmetic expression.

    Variables are t, x1..x3 and c1..cP; when ``n_species`` is given,
    concentration indices above it are rejected.
    """
    def identifier_ok(name: str) -> bool:
        index = is_concentration(name)
        if index is not None:
            return n_species is None or index <= n_species
        return name == "t" or name in _SPATIAL

    parser = ExpressionParser(tokenize(text), identifier_ok=identifier_ok)
    node = parser.parse_expr()
    if parser.peek().kind != "eof":
        raise parser.error("unexpected trailing input")
    return node


# Evaluation ------------------------------------------------------------------

def _finish(value) -> Value:
    array = np.asarray(value, dtype=float)
    return float(array) if array.ndim == 0 else array


def eval_expression(node: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate an expression; ``env`` may bind floats or numpy arrays.

    Raises:
        UnboundVariable: a variable is missing from ``env``
        DomainError: division by zero or fractional power of a negative base
    """
    return _finish(_eval(node, env))


def _eval(node: Expr, env: Mapping[str, Value]):
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariable(node.name) from None
    if isinstance(node, Neg):
        return -np.asarray(_eval(node.operand, env), dtype=float)
    if isinstance(node, Add):
        return np.add(_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Sub):
        return np.subtract(_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Mul):
        return np.multiply(_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Div):
        numerator = np.asarray(_eval(node.left, env), dtype=float)
        denominator = np.asarray(_eval(node.right, env), dtype=float)
        if np.any(denominator == 0.0):
            raise DomainError("division by zero")
        return numerator / denominator
    if isinstance(node, Pow):
        base = np.asarray(_eval(node.base, env), dtype=float)
        exponent = np.asarray(_eval(node.exponent, env), dtype=float)
        fractional = exponent != np.round(exponent)
        if np.any(fractional & (base < 0.0)):
            raise DomainError("fractional power of a negative base")
        if np.any((base == 0.0) & (exponent < 0.0)):
            raise DomainError("division by zero")
        return np.power(base, exponent)
    if isinstance(node, Exp):
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(_eval(node.operand, env), dtype=float))
    if isinstance(node, Min):
        return np.minimum(_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, Max):
        return np.maximum(_eval(node.left, env), _eval(node.right, env))
    raise TypeError(f"not an expression node: {node!r}")


def exact_value(node: Expr) -> Optional[Fraction]:
    """Exact rational value of a variable-free expression, if it has one."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        inner = exact_value(node.operand)
        return None if inner is None else -inner
    if isinstance(node, (Add, Sub, Mul, Div, Min, Max)):
        left, right = exact_value(node.left), exact_value(node.right)
        if left is None or right is None:
            return None
        if isinstance(node, Add):
            return left + right
        if isinstance(node, Sub):
            return left - right
        if isinstance(node, Mul):
            return left * right
        if isinstance(node, Min):
            return min(left, right)
        if isinstance(node, Max):
            return max(left, right)
        return None if right == 0 else left / right
    if isinstance(node, Pow):
        base, exponent = exact_value(node.base), exact_value(node.exponent)
        if base is None or exponent is None or exponent.denominator != 1:
            return None
        if base == 0 and exponent < 0:
            return None
        return base ** exponent.numerator
    return None


# Structure -------------------------------------------------------------------

def variables(node: Expr) -> frozenset[str]:
    """Names of all variables referenced by an expression."""
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, (Neg, Exp)):
        return variables(node.operand)
    if isinstance(node, Pow):
        return variables(node.base) | variables(node.exponent)
    return variables(node.left) | variables(node.right)


def substitute(node: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, Exp):
        return Exp(substitute(node.operand, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, mapping), substitute(node.exponent, mapping))
    return type(node)(substitute(node.left, mapping), substitute(node.right, mapping))


_PRECEDENCE = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}
_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def _prec(node: Expr) -> int:
    return _PRECEDENCE.get(type(node), 5)


def format_expression(node: Expr) -> str:
    """Render an expression so that it reparses to the same tree."""
    def wrap(child: Expr, required: int) -> str:
        text = format_expression(child)
        return f"({text})" if _prec(child) < required else text

    if isinstance(node, Num):
        text = format_decimal(abs(node.value))
        return f"(-{text})" if node.value < 0 else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + wrap(node.operand, 3)
    if isinstance(node, Pow):
        return f"{wrap(node.base, 5)}^{wrap(node.exponent, 3)}"
    if isinstance(node, Exp):
        return f"exp({format_expression(node.operand)})"
    if isinstance(node, (Min, Max)):
        name = "min" if isinstance(node, Min) else "max"
        return f"{name}({format_expression(node.left)}, {format_expression(node.right)})"
    level = _PRECEDENCE[type(node)]
    return f"{wrap(node.left, level)} {_SYMBOL[type(node)]} {wrap(node.right, level + 1)}"


def as_polynomial(node: Expr, var: str) -> Optional[Polynomial]:
    """Polynomial in ``var`` equal to the expression, or None if it is not one."""
    if isinstance(node, Num):
        return Polynomial([float(node.value)])
    if isinstance(node, Var):
        return Polynomial([0.0, 1.0]) if node.name == var else None
    if isinstance(node, Neg):
        inner = as_polynomial(node.operand, var)
        return None if inner is None else -inner
    if isinstance(node, (Add, Sub, Mul)):
        left, right = as_polynomial(node.left, var), as_polynomial(node.right, var)
        if left is None or right is None:
            return None
        if isinstance(node, Add):
            return left + right
        if isinstance(node, Sub):
            return left - right
        return left * right
    if isinstance(node, Div):
        constant = exact_value(node.right)
        left = as_polynomial(node.left, var)
        if left is None or constant is None or constant == 0:
            return None
        return left / float(constant)
    if isinstance(node, Pow):
        exponent = exact_value(node.exponent)
        base = as_polynomial(node.base, var)
        if base is None or exponent is None or exponent.denominator != 1 or exponent < 0:
            return None
        return base ** int(exponent)
    return None


class Antiderivative:
    """D(y) = ∫₀^y d(s) ds for a diffusivity depending on one concentration.

    Polynomial integrands are integrated in closed form; anything else uses
    adaptive quadrature for scalars and panel Gauss-Legendre for arrays.
    """

    def __init__(self, node: Expr, var: str):
        self.node = node
        self.var = var
        poly = as_polynomial(node, var)
        self._poly = poly.integ() if poly is not None else None
        nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_ORDER)
        panel = np.arange(QUADRATURE_PANELS)[:, None]
        self._fractions = ((panel + (nodes[None, :] + 1.0) / 2.0) / QUADRATURE_PANELS).ravel()
        self._weights = np.tile(weights / (2.0 * QUADRATURE_PANELS), QUADRATURE_PANELS)

    @property
    def exact(self) -> bool:
        return self._poly is not None

    def derivative(self, y: Value) -> Value:
        """d(y), broadcast to the shape of ``y``."""
        values = eval_expression(self.node, {self.var: y})
        return _finish(np.broadcast_to(values, np.shape(y)))

    def __call__(self, y: Value) -> Value:
        if self._poly is not None:
            return _finish(self._poly(np.asarray(y, dtype=float)))
        if np.ndim(y) == 0:
            value, _ = integrate.quad(
                lambda s: float(eval_expression(self.node, {self.var: s})),
                0.0, float(y), epsabs=QUADRATURE_TOL, epsrel=QUADRATURE_TOL, limit=200,
            )
            return value
        y = np.asarray(y, dtype=float)
        points = y[..., None] * self._fractions
        values = np.broadcast_to(eval_expression(self.node, {self.var: points}), points.shape)
        return y * np.sum(values * self._weights, axis=-1)
