"""
Exact arithmetic substrate.

Rationals are ``fractions.Fraction``. Real numbers built from integers,
rationals, + - * /, square roots and pi are kept as ``RealExpr`` trees and
only ever compared through certified interval enclosures. A comparison is
LESS or GREATER only when the enclosures are disjoint, and EQUAL only when
sympy proves the identity.
"""
from __future__ import annotations

import enum
import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, List, Optional, Tuple, Union

import mpmath
import sympy
from mpmath.libmp import mpf_pi, round_ceiling, round_floor

from .. import config


logger = logging.getLogger(__name__)

Rational = Fraction

BASE_PRECISION = 64
# Guard bits added on top of the requested width when evaluating
GUARD_BITS = 16
# Ladder rung at which an overlap triggers the symbolic identity check
SYMBOLIC_RUNG = 128


class DSpectrumError(RuntimeError):
    """Base class for every error raised by the toolkit."""


class DivisionByZeroError(DSpectrumError, ZeroDivisionError):
    pass


class PrecisionExhausted(DSpectrumError):
    """The precision ladder reached its cap without deciding a question."""

    def __init__(self, message: str, precision: int):
        super().__init__(f"{message} (max precision {precision} bits)")
        self.precision = precision


class UndecidedTie(DSpectrumError):
    pass


class DomainViolation(DSpectrumError, ValueError):
    pass


class ParseError(DSpectrumError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class _InsufficientPrecision(Exception):
    """Internal signal: a divisor enclosure still straddles zero."""


def rat_arith(a: Fraction, op: str, b: Fraction) -> Fraction:
    """Exact rational arithmetic; ``op`` is one of + - * / (unicode forms accepted)."""
    a, b = Fraction(a), Fraction(b)
    if op in ("+",):
        return a + b
    if op in ("-", "−"):
        return a - b
    if op in ("*", "×"):
        return a * b
    if op in ("/", "÷"):
        if b == 0:
            raise DivisionByZeroError(f"division of {format_rational(a)} by zero")
        return a / b
    raise ValueError(f"Unknown rational operator: {op!r}")


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi


def _round_down(x: Fraction, prec: int) -> Fraction:
    scale = 1 << prec
    if x.denominator <= scale:
        return x
    return Fraction(math.floor(x * scale), scale)


def _round_up(x: Fraction, prec: int) -> Fraction:
    scale = 1 << prec
    if x.denominator <= scale:
        return x
    return Fraction(math.ceil(x * scale), scale)


def _sqrt_floor(x: Fraction, prec: int) -> Fraction:
    scale = 1 << prec
    return Fraction(math.isqrt(math.floor(x * scale * scale)), scale)


def _sqrt_ceil(x: Fraction, prec: int) -> Fraction:
    scale = 1 << prec
    target = math.ceil(x * scale * scale)
    root = math.isqrt(target)
    if root * root < target:
        root += 1
    return Fraction(root, scale)


def _mpf_to_fraction(value: tuple) -> Fraction:
    sign, man, exp, _ = value
    result = Fraction(man) * Fraction(2) ** exp
    return -result if sign else result


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealExpr:
    """
    Immutable expression tree. ``op`` is one of ``lit``, ``pi``, ``+``, ``-``,
    ``*``, ``/``, ``neg`` or ``sqrt``. Literal-only arithmetic folds to a
    literal, so a tree free of sqrt and pi is always a single ``lit`` node.
    """

    op: str
    args: Tuple["RealExpr", ...] = ()
    value: Optional[Fraction] = None

    def exact_value(self) -> Optional[Fraction]:
        return self.value if self.op == "lit" else None

    @property
    def is_rational(self) -> bool:
        return self.op == "lit"

    def __add__(self, other):
        return _binary("+", self, other)

    def __radd__(self, other):
        return _binary("+", other, self)

    def __sub__(self, other):
        return _binary("-", self, other)

    def __rsub__(self, other):
        return _binary("-", other, self)

    def __mul__(self, other):
        return _binary("*", self, other)

    def __rmul__(self, other):
        return _binary("*", other, self)

    def __truediv__(self, other):
        return _binary("/", self, other)

    def __rtruediv__(self, other):
        return _binary("/", other, self)

    def __neg__(self):
        if self.op == "lit":
            return lit(-self.value)
        return RealExpr("neg", (self,))

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise TypeError("RealExpr supports non-negative integer powers only")
        result = lit(1)
        for _ in range(exponent):
            result = result * self
        return result

    def __str__(self) -> str:
        return to_prefix(self)


ExprLike = Union[int, Fraction, RealExpr]


def lit(value: Union[int, Fraction]) -> RealExpr:
    if isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise TypeError(f"Literal must be int or Fraction, got {type(value).__name__}")
    return RealExpr("lit", (), Fraction(value))


def as_expr(value: ExprLike) -> RealExpr:
    if isinstance(value, RealExpr):
        return value
    return lit(value)


def _binary(op: str, left: ExprLike, right: ExprLike) -> RealExpr:
    left, right = as_expr(left), as_expr(right)
    if left.op == "lit" and right.op == "lit":
        return lit(rat_arith(left.value, op, right.value))
    if op == "/" and right.op == "lit" and right.value == 0:
        raise DivisionByZeroError("division by literal zero")
    # identities with a literal 0 or 1
    if op == "*" and (left.value == 0 or right.value == 0):
        return lit(0)
    if op == "*" and left.value == 1 or op == "+" and left.value == 0:
        return right
    if op in ("*", "/") and right.value == 1 or op in ("+", "-") and right.value == 0:
        return left
    return RealExpr(op, (left, right))


def sqrt(value: ExprLike) -> RealExpr:
    value = as_expr(value)
    if value.op == "lit":
        if value.value < 0:
            raise DomainViolation(f"sqrt of negative rational {format_rational(value.value)}")
        num = math.isqrt(value.value.numerator)
        den = math.isqrt(value.value.denominator)
        if num * num == value.value.numerator and den * den == value.value.denominator:
            return lit(Fraction(num, den))
    return RealExpr("sqrt", (value,))


PI = RealExpr("pi")


@lru_cache(maxsize=65536)
def _enclose(expr: RealExpr, prec: int) -> Interval:
    op = expr.op
    if op == "lit":
        return Interval(expr.value, expr.value)
    if op == "pi":
        return Interval(
            _mpf_to_fraction(mpf_pi(prec + 8, round_floor)),
            _mpf_to_fraction(mpf_pi(prec + 8, round_ceiling)),
        )
    parts = [_enclose(arg, prec) for arg in expr.args]
    if op == "neg":
        return Interval(-parts[0].hi, -parts[0].lo)
    if op == "sqrt":
        inner = parts[0]
        if inner.hi < 0:
            raise DomainViolation("sqrt of a negative expression")
        lo = max(inner.lo, Fraction(0))
        return Interval(_sqrt_floor(lo, prec), _sqrt_ceil(inner.hi, prec))
    a, b = parts
    if op == "+":
        lo, hi = a.lo + b.lo, a.hi + b.hi
    elif op == "-":
        lo, hi = a.lo - b.hi, a.hi - b.lo
    elif op == "*":
        products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
        lo, hi = min(products), max(products)
    elif op == "/":
        if b.contains_zero():
            raise _InsufficientPrecision()
        quotients = (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi)
        lo, hi = min(quotients), max(quotients)
    else:
        raise ValueError(f"Unknown expression operator: {op!r}")
    return Interval(_round_down(lo, prec), _round_up(hi, prec))


def precision_ladder(max_precision: Optional[int] = None) -> Iterator[int]:
    """Yield 64, 128, 256, ... up to and including ``max_precision``."""
    cap = max_precision or config.MAX_PRECISION
    prec = BASE_PRECISION
    while prec < cap:
        yield prec
        prec *= 2
    yield cap


def evaluate(expr: ExprLike, precision: int, max_precision: Optional[int] = None) -> Interval:
    """Enclose ``expr`` in an interval of width at most 2**-precision."""
    expr = as_expr(expr)
    if expr.op == "lit":
        return Interval(expr.value, expr.value)
    target = Fraction(1, 1 << precision)
    cap = max(max_precision or config.MAX_PRECISION, precision + GUARD_BITS)
    prec = precision + GUARD_BITS
    while prec <= 8 * cap:
        try:
            enclosure = _enclose(expr, prec)
        except _InsufficientPrecision:
            enclosure = None
        if enclosure is not None and enclosure.width <= target:
            return enclosure
        prec *= 2
    raise PrecisionExhausted(f"could not enclose {to_prefix(expr)} to {precision} bits", cap)


def try_enclose(expr: RealExpr, prec: int) -> Optional[Interval]:
    try:
        return _enclose(expr, prec)
    except _InsufficientPrecision:
        return None


def to_sympy(expr: RealExpr):
    op = expr.op
    if op == "lit":
        return sympy.Rational(expr.value.numerator, expr.value.denominator)
    if op == "pi":
        return sympy.pi
    args = [to_sympy(arg) for arg in expr.args]
    if op == "neg":
        return -args[0]
    if op == "sqrt":
        return sympy.sqrt(args[0])
    if op == "+":
        return args[0] + args[1]
    if op == "-":
        return args[0] - args[1]
    if op == "*":
        return args[0] * args[1]
    return args[0] / args[1]


def symbolically_equal(a: ExprLike, b: ExprLike) -> bool:
    try:
        difference = sympy.simplify(to_sympy(as_expr(a)) - to_sympy(as_expr(b)))
    except Exception:  # sympy may fail on pathological trees
        logger.exception("Symbolic comparison failed")
        return False
    return difference == 0


@lru_cache(maxsize=1024)
def symbolic_rational(expr: RealExpr) -> Optional[Fraction]:
    """The value of ``expr`` when sympy reduces it to a rational, else None."""
    try:
        value = sympy.simplify(to_sympy(expr))
    except Exception:  # sympy may fail on pathological trees
        logger.exception("Symbolic simplification failed")
        return None
    if value.is_Rational:
        return Fraction(int(value.p), int(value.q))
    return None


class Outcome(enum.Enum):
    LESS = "LESS"
    EQUAL = "EQUAL"
    GREATER = "GREATER"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class CertifiedOrdering:
    outcome: Outcome
    precision: int


def _order_fractions(a: Fraction, b: Fraction) -> Outcome:
    if a < b:
        return Outcome.LESS
    if a > b:
        return Outcome.GREATER
    return Outcome.EQUAL


def certified_compare(
    a: ExprLike, b: ExprLike, max_precision: Optional[int] = None
) -> CertifiedOrdering:
    a, b = as_expr(a), as_expr(b)
    if a.op == "lit" and b.op == "lit":
        return CertifiedOrdering(_order_fractions(a.value, b.value), 0)
    symbolic_checked = False
    last = BASE_PRECISION
    for prec in precision_ladder(max_precision):
        last = prec
        left, right = try_enclose(a, prec), try_enclose(b, prec)
        if left is not None and right is not None:
            if left.hi < right.lo:
                return CertifiedOrdering(Outcome.LESS, prec)
            if right.hi < left.lo:
                return CertifiedOrdering(Outcome.GREATER, prec)
            if left.lo == left.hi == right.lo == right.hi:
                return CertifiedOrdering(Outcome.EQUAL, prec)
        if prec >= SYMBOLIC_RUNG and not symbolic_checked:
            symbolic_checked = True
            if symbolically_equal(a, b):
                return CertifiedOrdering(Outcome.EQUAL, prec)
    logger.warning("Comparison undecided at %s bits: %s vs %s", last, to_prefix(a), to_prefix(b))
    return CertifiedOrdering(Outcome.UNDECIDED, last)


def compare_or_raise(a: ExprLike, b: ExprLike, max_precision: Optional[int] = None) -> int:
    """Return -1, 0 or 1; raise PrecisionExhausted when undecided."""
    result = certified_compare(a, b, max_precision)
    if result.outcome is Outcome.UNDECIDED:
        raise PrecisionExhausted("comparison undecided", result.precision)
    return {Outcome.LESS: -1, Outcome.EQUAL: 0, Outcome.GREATER: 1}[result.outcome]


def abs_expr(x: ExprLike, max_precision: Optional[int] = None) -> RealExpr:
    x = as_expr(x)
    if x.op == "lit":
        return lit(abs(x.value))
    return -x if compare_or_raise(x, 0, max_precision) < 0 else x


def nearest_int(x: ExprLike, max_precision: Optional[int] = None) -> Tuple[int, RealExpr]:
    """
    Nearest integer to ``x`` and the distance to it. Exact half-integers
    round to the even neighbour; an unresolvable near-tie raises UndecidedTie.
    """
    x = as_expr(x)
    if x.op == "lit":
        m = round(x.value)
        return m, lit(abs(x.value - m))
    half = Fraction(1, 2)
    enclosure = None
    for prec in precision_ladder(max_precision):
        enclosure = try_enclose(x, prec)
        if enclosure is None:
            continue
        m = math.floor(enclosure.lo + half)
        if m - half < enclosure.lo and enclosure.hi < m + half:
            if enclosure.lo >= m:
                return m, x - m
            if enclosure.hi <= m:
                return m, m - x
            return m, abs_expr(x - m, max_precision)
    if enclosure is not None:
        tie = math.floor(enclosure.midpoint) + half
        if symbolically_equal(x, lit(tie)):
            m = math.floor(tie) if math.floor(tie) % 2 == 0 else math.ceil(tie)
            return m, lit(half)
    raise UndecidedTie(f"nearest integer to {to_prefix(x)} undecided")


def certified_floor(x: ExprLike, max_precision: Optional[int] = None) -> int:
    x = as_expr(x)
    if x.op == "lit":
        return math.floor(x.value)
    enclosure = None
    cap = BASE_PRECISION
    for prec in precision_ladder(max_precision):
        cap = prec
        enclosure = try_enclose(x, prec)
        if enclosure is not None and math.floor(enclosure.lo) == math.floor(enclosure.hi):
            return math.floor(enclosure.lo)
    if enclosure is not None:
        candidate = math.floor(enclosure.hi)
        if symbolically_equal(x, lit(candidate)):
            return candidate
    raise PrecisionExhausted(f"floor of {to_prefix(x)} undecided", cap)


def certified_ceil(x: ExprLike, max_precision: Optional[int] = None) -> int:
    return -certified_floor(-as_expr(x), max_precision)


def lower_bound(x: ExprLike, precision: int = BASE_PRECISION) -> Fraction:
    """A rational certified to be <= x."""
    return evaluate(x, precision).lo


def upper_bound(x: ExprLike, precision: int = BASE_PRECISION) -> Fraction:
    """A rational certified to be >= x."""
    return evaluate(x, precision).hi


def to_float(x: ExprLike) -> float:
    return float(evaluate(x, 60).midpoint)


def approx(x: ExprLike, digits: int = 20) -> str:
    """Decimal approximation for display; never used in a decision."""
    enclosure = evaluate(x, int(digits * 3.33) + 8)
    mid = enclosure.midpoint
    with mpmath.workdps(digits + 5):
        return mpmath.nstr(mpmath.mpf(mid.numerator) / mid.denominator, digits)


def below_two_over_sqrt3(x: Fraction) -> bool:
    """Exact test x < 2/sqrt(3)."""
    x = Fraction(x)
    return x < 0 or 3 * x * x < 4


# ---------------------------------------------------------------------------
# Prefix text form
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_OPERATORS = {"+", "-", "*", "/", "sqrt"}


def _tokenize(text: str) -> List[Tuple[str, int]]:
    return [(match.group(0), match.start()) for match in _TOKEN.finditer(text)]


def _parse_atom(token: str, position: int) -> RealExpr:
    if token == "pi":
        return PI
    if token == "golden":
        return GOLDEN_RATIO
    if token in _OPERATORS:
        raise ParseError(f"Operator {token!r} outside parentheses", position)
    try:
        return lit(Fraction(token))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"Invalid number {token!r}", position) from exc


def parse_expr(text: str) -> RealExpr:
    """
    Parse the prefix form, e.g. ``(sqrt 2)``, ``(/ (+ 1 (sqrt 5)) 2)``,
    ``355/113``, ``pi`` or ``golden``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("Empty expression", 0)
    expr, index = _parse_at(tokens, 0)
    if index != len(tokens):
        raise ParseError(f"Unexpected trailing token {tokens[index][0]!r}", tokens[index][1])
    return expr


def _parse_at(tokens: List[Tuple[str, int]], index: int) -> Tuple[RealExpr, int]:
    if index >= len(tokens):
        end = tokens[-1][1] + len(tokens[-1][0]) if tokens else 0
        raise ParseError("Unexpected end of input", end)
    token, position = tokens[index]
    if token == ")":
        raise ParseError("Unbalanced ')'", position)
    if token != "(":
        return _parse_atom(token, position), index + 1
    if index + 1 >= len(tokens):
        raise ParseError("Unexpected end of input", position + 1)
    op, op_position = tokens[index + 1]
    if op not in _OPERATORS:
        raise ParseError(f"Unknown operator {op!r}", op_position)
    args: List[RealExpr] = []
    index += 2
    while True:
        if index >= len(tokens):
            raise ParseError("Missing ')'", position)
        if tokens[index][0] == ")":
            index += 1
            break
        arg, index = _parse_at(tokens, index)
        args.append(arg)
    return _apply(op, args, op_position), index


def _apply(op: str, args: List[RealExpr], position: int) -> RealExpr:
    if not args:
        raise ParseError(f"Operator {op!r} needs arguments", position)
    try:
        if op == "sqrt":
            if len(args) != 1:
                raise ParseError("sqrt takes exactly one argument", position)
            return sqrt(args[0])
        if op == "-" and len(args) == 1:
            return -args[0]
        if op == "/" and len(args) != 2:
            raise ParseError("'/' takes exactly two arguments", position)
        result = args[0]
        for arg in args[1:]:
            result = _binary(op, result, arg)
        return result
    except (DivisionByZeroError, DomainViolation) as exc:
        raise ParseError(str(exc), position) from exc


def to_prefix(expr: RealExpr) -> str:
    op = expr.op
    if op == "lit":
        value = expr.value
        return str(value.numerator) if value.denominator == 1 else format_rational(value)
    if op == "pi":
        return "pi"
    if op == "neg":
        return f"(- {to_prefix(expr.args[0])})"
    inner = " ".join(to_prefix(arg) for arg in expr.args)
    return f"({op} {inner})"


# ---------------------------------------------------------------------------
# Reference constants
# ---------------------------------------------------------------------------

TWO_OVER_SQRT3 = lit(2) / sqrt(3)
GOLDEN_RATIO = (1 + sqrt(5)) / 2
FOUR_OVER_PI = lit(4) / PI
# Limit of the one-dimensional Dirichlet spectrum as the golden ratio
GOLDEN_DIRICHLET_LIMIT = (5 + sqrt(5)) / 10
# Known two-dimensional bounds kept for reference output
SPECTRUM_MEASURE_BOUND = (4 + 3 * sqrt(3)) / 11
SPECTRUM_STAR_BOUNDS = ((3 * sqrt(5) - 5) / 2, (38 + 6 * sqrt(2)) / 49)
