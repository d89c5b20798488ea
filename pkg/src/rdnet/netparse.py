#!/usr/bin/env python3
"""Parser and pretty-printer for the .rxn reaction network language.

A network file is a sequence of ';'-terminated statements::

    species A1 A2 A3;
    A1 + A2 <-> A3 : kf=1, kb=1;
    diff A1 = 0.1 + 0.05*c1 : dmin=0.1;
    box c=[0,100], t=[0,10], x=[0,1];
    dim 3;

Concentrations inside diffusivity expressions are named c1..cP in
declaration order.
"""

import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .constants import VALIDATION_SAMPLES, VALIDATION_SEED, DiffusivityKind, Direction
from .errors import DomainError, ParseError, ValidationError
from .expressions import (
    Expr,
    ExpressionParser,
    Token,
    eval_expression,
    exact_value,
    format_expression,
    is_concentration,
    tokenize,
    variables,
)
from .models import DiffusivityLaw, NetworkSpec, ReactionSpec, SamplingBox
from .utils import format_decimal

logger = logging.getLogger(__name__)

KEYWORDS = frozenset(("species", "diff", "box", "dim"))
RATE_KEYS = ("kf", "kb", "alpha", "beta", "gamma")
ARROWS = {d.value: d for d in Direction}
_SPATIAL = frozenset(("t", "x1", "x2", "x3"))
_BOUND_DIGITS = 10 ** 9


def _identifier_ok(name: str) -> bool:
    # species range is checked after the whole file is read
    return name in _SPATIAL or is_concentration(name) is not None


class _NetworkParser(ExpressionParser):
    """Statement-level recursive descent on top of the expression parser."""

    def __init__(self, text: str):
        super().__init__(tokenize(text), identifier_ok=_identifier_ok)
        self.species: list[str] = []
        self.reactions: list[ReactionSpec] = []
        self.diffusivities: dict[str, tuple[Expr, Optional[Fraction], Token]] = {}
        self.box: dict[str, tuple[Fraction, Fraction]] = {}
        self.dim: Optional[int] = None

    def at_op(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text == text

    def expect_ident(self, what: str) -> Token:
        token = self.peek()
        if token.kind != "ident":
            raise self.error(f"expected {what}")
        return self.advance()

    def parse_number(self) -> Fraction:
        negative = False
        if self.at_op("-"):
            self.advance()
            negative = True
        token = self.peek()
        if token.kind != "num":
            raise self.error("expected a number")
        self.advance()
        value = Fraction(token.text)
        return -value if negative else value

    def species_index(self, token: Token) -> int:
        try:
            return self.species.index(token.text)
        except ValueError:
            raise ValidationError(
                f"line {token.line}, column {token.column}: unknown species '{token.text}'") from None

    # statements --------------------------------------------------------------

    def parse(self) -> None:
        while self.peek().kind != "eof":
            token = self.peek()
            if token.kind == "ident" and token.text in KEYWORDS:
                getattr(self, f"parse_{token.text}")()
            elif token.kind in ("ident", "num"):
                self.parse_reaction()
            else:
                raise self.error("expected a statement")
            self.expect_op(";")

    def parse_species(self) -> None:
        self.advance()
        if self.peek().kind != "ident":
            raise self.error("expected at least one species name")
        while self.peek().kind == "ident":
            token = self.advance()
            if token.text in KEYWORDS:
                raise ValidationError(f"line {token.line}: '{token.text}' is reserved")
            if token.text in self.species:
                raise ValidationError(f"line {token.line}: species '{token.text}' declared twice")
            self.species.append(token.text)

    def parse_lhs_term(self) -> list[Token]:
        count = 1
        token = self.peek()
        if token.kind == "num":
            value = Fraction(token.text)
            if value.denominator != 1 or value < 1:
                raise self.error("stoichiometric coefficient must be a positive integer", token)
            count = int(value)
            self.advance()
        name = self.expect_ident("a species name")
        return [name] * count

    def parse_reaction(self) -> None:
        start = self.peek()
        reactants = self.parse_lhs_term()
        while self.at_op("+"):
            plus = self.advance()
            if self.peek().kind not in ("ident", "num"):
                raise ParseError("dangling '+' on left-hand side", plus.line, plus.column, plus.text)
            reactants.extend(self.parse_lhs_term())

        arrow = self.peek()
        if arrow.kind != "op" or arrow.text not in ARROWS:
            raise self.error("expected a reaction arrow '<->', '->' or '<-'")
        self.advance()
        product = self.expect_ident("a product species")
        self.expect_op(":")

        options: dict[str, Fraction] = {}
        while True:
            key = self.expect_ident("a rate parameter")
            if key.text not in RATE_KEYS:
                raise self.error(f"unknown rate parameter '{key.text}'", key)
            if key.text in options:
                raise self.error(f"duplicate rate parameter '{key.text}'", key)
            self.expect_op("=")
            options[key.text] = self.parse_number()
            if not self.at_op(","):
                break
            self.advance()
        for required in ("kf", "kb"):
            if required not in options:
                raise self.error(f"reaction is missing '{required}='")

        if len(reactants) != 2:
            raise ValidationError(
                f"line {start.line}: left-hand side must contain exactly two molecules, got {len(reactants)}")
        a, b = (self.species_index(tok) for tok in reactants)
        try:
            reaction = ReactionSpec(
                reactant_a=a,
                reactant_b=b,
                product=self.species_index(product),
                kf=options["kf"],
                kb=options["kb"],
                alpha=options.get("alpha", Fraction(1)),
                beta=options.get("beta", Fraction(1)),
                gamma=options.get("gamma", Fraction(1)),
                direction=ARROWS[arrow.text],
            )
        except ValidationError as e:
            raise ValidationError(f"line {start.line}: {e}") from None
        self.reactions.append(reaction)

    def parse_diff(self) -> None:
        self.advance()
        name = self.expect_ident("a species name")
        self.species_index(name)
        if name.text in self.diffusivities:
            raise ValidationError(f"line {name.line}: diffusivity for '{name.text}' given twice")
        self.expect_op("=")
        expression = self.parse_expr()
        dmin = None
        if self.at_op(":"):
            self.advance()
            key = self.expect_ident("'dmin'")
            if key.text != "dmin":
                raise self.error("expected 'dmin'", key)
            self.expect_op("=")
            dmin = self.parse_number()
        self.diffusivities[name.text] = (expression, dmin, name)

    def parse_box(self) -> None:
        self.advance()
        while True:
            key = self.expect_ident("'c', 't' or 'x'")
            if key.text not in ("c", "t", "x"):
                raise self.error("box axes are 'c', 't' and 'x'", key)
            self.expect_op("=")
            self.expect_op("[")
            lo = self.parse_number()
            self.expect_op(",")
            hi = self.parse_number()
            self.expect_op("]")
            self.box[key.text] = (lo, hi)
            if not self.at_op(","):
                break
            self.advance()

    def parse_dim(self) -> None:
        self.advance()
        token = self.peek()
        value = self.parse_number()
        if value.denominator != 1 or value < 1:
            raise self.error("dimension must be a positive integer", token)
        self.dim = int(value)


# validation ------------------------------------------------------------------

def infer_kind(expression: Expr, owner: int) -> DiffusivityKind:
    """Classify a diffusivity expression for species index ``owner`` (0-based)."""
    names = variables(expression)
    if not names:
        return DiffusivityKind.CONSTANT
    if names == {f"c{owner + 1}"}:
        return DiffusivityKind.OWN_CONCENTRATION
    return DiffusivityKind.GENERAL


def sample_environment(box: SamplingBox, n_species: int, samples: int, seed: int) -> dict[str, np.ndarray]:
    """Random points of the admissible box; the first two are its low and high corners."""
    rng = np.random.default_rng(seed)

    def axis(bounds) -> np.ndarray:
        lo, hi = float(bounds[0]), float(bounds[1])
        values = rng.uniform(lo, hi, samples)
        values[0] = lo
        if samples > 1:
            values[1] = hi
        return values

    env = {"t": axis(box.t)}
    for name in ("x1", "x2", "x3"):
        env[name] = axis(box.x)
    for i in range(n_species):
        env[f"c{i + 1}"] = axis(box.c)
    return env


def build_diffusivity(expression: Expr, dmin: Optional[Fraction], owner: int, name: str,
                      env: dict[str, np.ndarray]) -> DiffusivityLaw:
    """Infer the kind of a diffusivity and certify its lower bound on sampled points."""
    kind = infer_kind(expression, owner)
    exact = exact_value(expression)
    if exact is not None:
        minimum = exact
    else:
        try:
            values = np.broadcast_to(eval_expression(expression, env), env["t"].shape)
        except DomainError as e:
            raise ValidationError(f"diffusivity of {name} is undefined on the admissible box: {e}") from None
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"diffusivity of {name} is not finite on the admissible box")
        low = float(values.min())
        minimum = Fraction(math.floor(low * _BOUND_DIGITS), _BOUND_DIGITS)

    if dmin is not None:
        if dmin <= 0:
            raise ValidationError(f"dmin for {name} must be positive, got {dmin}")
        if minimum < dmin:
            raise ValidationError(f"diffusivity of {name} drops to {float(minimum)} below dmin={dmin}")
        lower = dmin
    else:
        if minimum <= 0:
            raise ValidationError(f"diffusivity of {name} is not bounded below by a positive constant")
        lower = minimum
    return DiffusivityLaw(kind, expression, lower)


def parse_network(text: str, *, samples: int = VALIDATION_SAMPLES, seed: int = VALIDATION_SEED) -> NetworkSpec:
    """Parse and validate a network source.

    Raises:
        ParseError: syntax violation
        ValidationError: unknown species, negative rate constant, product equal
            to a reactant, non-positive exponent or an unbounded diffusivity
    """
    parser = _NetworkParser(text)
    parser.parse()
    if not parser.species:
        raise ValidationError("a network needs at least one species")

    n_species = len(parser.species)
    for expression, _, token in parser.diffusivities.values():
        for var in variables(expression):
            index = is_concentration(var)
            if index is not None and index > n_species:
                raise ValidationError(
                    f"line {token.line}: diffusivity of {token.text} references {var} "
                    f"but only {n_species} species are declared")

    box = SamplingBox(**parser.box)
    env = sample_environment(box, n_species, samples, seed) if parser.diffusivities else {}
    diffusivities = []
    for i, name in enumerate(parser.species):
        if name in parser.diffusivities:
            expression, dmin, _ = parser.diffusivities[name]
            diffusivities.append(build_diffusivity(expression, dmin, i, name, env))
        else:
            diffusivities.append(DiffusivityLaw.default())

    spec = NetworkSpec(
        species=tuple(parser.species),
        reactions=tuple(parser.reactions),
        diffusivities=tuple(diffusivities),
        dim_hint=parser.dim,
        box=box,
    )
    logger.debug(f"Parsed network with {spec.n_species} species and {spec.n_reactions} reactions")
    return spec


def load_network(path: Union[str, Path], **kwargs) -> NetworkSpec:
    """Read and parse a .rxn file."""
    return parse_network(Path(path).read_text(encoding="utf-8"), **kwargs)


# pretty printing -------------------------------------------------------------

def _format_interval(bounds) -> str:
    return f"[{_format_number(bounds[0])},{_format_number(bounds[1])}]"


def _format_number(value: Fraction) -> str:
    return format_decimal(value)


def format_reaction(spec: NetworkSpec, reaction: ReactionSpec) -> str:
    names = spec.species
    if reaction.is_dimerization:
        lhs = f"2 {names[reaction.reactant_a]}"
    else:
        lhs = f"{names[reaction.reactant_a]} + {names[reaction.reactant_b]}"
    rates = f"kf={_format_number(reaction.kf)}, kb={_format_number(reaction.kb)}"
    if not reaction.unit_exponents:
        rates += (f", alpha={_format_number(reaction.alpha)}, beta={_format_number(reaction.beta)}"
                  f", gamma={_format_number(reaction.gamma)}")
    return f"{lhs} {reaction.direction.value} {names[reaction.product]} : {rates};"


def format_network(spec: NetworkSpec) -> str:
    """Render a network as source text that parses back to an equal NetworkSpec."""
    lines = [f"species {' '.join(spec.species)};"]
    lines.extend(format_reaction(spec, reaction) for reaction in spec.reactions)
    for name, law in zip(spec.species, spec.diffusivities):
        if law.is_default:
            continue
        lines.append(f"diff {name} = {format_expression(law.expression)} "
                     f": dmin={_format_number(law.lower_bound)};")
    if not spec.box.is_default:
        box = spec.box
        lines.append(f"box c={_format_interval(box.c)}, t={_format_interval(box.t)}, "
                     f"x={_format_interval(box.x)};")
    if spec.dim_hint is not None:
        lines.append(f"dim {spec.dim_hint};")
    return "\n".join(lines) + "\n"
