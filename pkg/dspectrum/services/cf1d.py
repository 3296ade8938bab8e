"""
One-dimensional continued fractions and the Dirichlet products
q_{n+1} * ||q_n alpha|| built from them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from .exact import (
    Interval,
    PrecisionExhausted,
    RealExpr,
    try_enclose,
    abs_expr,
    as_expr,
    evaluate,
    lit,
    nearest_int,
    precision_ladder,
    symbolic_rational,
    to_float,
    to_prefix,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Convergent:
    n: int
    p: int
    q: int


@dataclass(frozen=True)
class CFExpansion:
    source: RealExpr
    a0: int
    partial_quotients: tuple
    terminated: bool = False

    @property
    def terms(self) -> List[int]:
        return [self.a0, *self.partial_quotients]

    def __str__(self) -> str:
        tail = ",".join(str(a) for a in self.partial_quotients)
        return f"[{self.a0};{tail}]" if tail else f"[{self.a0}]"


def _expand_rational(value: Fraction, count: int) -> tuple:
    terms = []
    while len(terms) < count:
        a = math.floor(value)
        terms.append(a)
        frac = value - a
        if frac == 0:
            return tuple(terms), True
        value = 1 / frac
    return tuple(terms), False


def _expand_interval(enclosure: Interval, count: int) -> List[int]:
    """Quotients shared by every real in the enclosure (at most ``count``)."""
    lo, hi = enclosure.lo, enclosure.hi
    terms: List[int] = []
    while len(terms) < count:
        a = math.floor(lo)
        if math.floor(hi) != a or lo == a:
            break
        terms.append(a)
        lo, hi = 1 / (hi - a), 1 / (lo - a)
    return terms


def cf_expand(alpha, count: int, max_precision: Optional[int] = None) -> CFExpansion:
    """
    First ``count`` terms a0, a1, ... of the expansion of ``alpha``.
    A rational alpha yields its complete (possibly shorter) expansion.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    alpha = as_expr(alpha)
    value = alpha.exact_value()
    if value is None:
        value = symbolic_rational(alpha)
    if value is not None:
        terms, terminated = _expand_rational(value, count)
        return CFExpansion(alpha, terms[0], terms[1:], terminated)
    best: List[int] = []
    last = 0
    for prec in precision_ladder(max_precision):
        last = prec
        enclosure = try_enclose(alpha, prec)
        if enclosure is None:
            continue
        terms = _expand_interval(enclosure, count)
        if len(terms) > len(best):
            best = terms
        if len(best) >= count:
            return CFExpansion(alpha, best[0], tuple(best[1:count]))
    raise PrecisionExhausted(
        f"only {len(best)} of {count} partial quotients of {to_prefix(alpha)} certified", last
    )


def convergents(terms: Sequence[int]) -> List[Convergent]:
    """Convergents p_n/q_n for n = 0 .. len(terms)-1."""
    p_prev, p = 1, terms[0]
    q_prev, q = 0, 1
    result = [Convergent(0, p, q)]
    for n, a in enumerate(terms[1:], start=1):
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        result.append(Convergent(n, p, q))
    return result


def from_partial_quotients(terms: Sequence[int]) -> RealExpr:
    """The rational [a0; a1, ..., ak]."""
    value = Fraction(terms[-1])
    for a in reversed(terms[:-1]):
        value = a + 1 / value
    return lit(value)


def _convergents_past(alpha: RealExpr, bound: int, max_precision: Optional[int]) -> List[Convergent]:
    """Convergents until the first denominator exceeding ``bound`` (or termination)."""
    count = 8
    while True:
        expansion = cf_expand(alpha, count, max_precision)
        convs = convergents(expansion.terms)
        if convs[-1].q > bound or expansion.terminated:
            return convs
        count *= 2


def psi1(alpha, t: int, max_precision: Optional[int] = None) -> RealExpr:
    """min over 1 <= q <= t of ||q alpha||, attained at a convergent denominator."""
    if t < 1:
        raise ValueError("t must be at least 1")
    alpha = as_expr(alpha)
    convs = _convergents_past(alpha, t, max_precision)
    q = max(c.q for c in convs if c.q <= t)
    _, distance = nearest_int(q * alpha, max_precision)
    return distance


@dataclass(frozen=True)
class DirichletProduct:
    n: int
    q_n: int
    q_next: int
    distance: RealExpr
    value: RealExpr


def dirichlet_products(alpha, count: int, max_precision: Optional[int] = None) -> List[DirichletProduct]:
    """q_{n+1} * ||q_n alpha|| for n = 0 .. count-1 (fewer for a short rational expansion)."""
    alpha = as_expr(alpha)
    expansion = cf_expand(alpha, count + 1, max_precision)
    convs = convergents(expansion.terms)
    products = []
    for n in range(min(count, len(convs) - 1)):
        _, distance = nearest_int(convs[n].q * alpha, max_precision)
        products.append(
            DirichletProduct(n, convs[n].q, convs[n + 1].q, distance, convs[n + 1].q * distance)
        )
    return products


@dataclass(frozen=True)
class BasicRelationReport:
    n: int
    lhs: Interval
    rhs: Interval

    @property
    def gap(self) -> Fraction:
        """Upper bound on |lhs - rhs|."""
        return max(self.lhs.hi - self.rhs.lo, self.rhs.hi - self.lhs.lo)


def _fold(terms: Sequence[int]) -> Fraction:
    value = Fraction(terms[-1])
    for a in reversed(terms[:-1]):
        value = a + 1 / value
    return value


def basic_relation_check(
    alpha, n: int, precision: int = 256, max_precision: Optional[int] = None
) -> BasicRelationReport:
    """
    Compare q_{n+1}||q_n alpha|| with 1 / (1 + 1/(alpha_{n+2} * alpha*_{n+1})),
    where alpha_{n+2} = [a_{n+2}; a_{n+3}, ...] and alpha*_{n+1} = [a_{n+1}; a_n, ..., a_1].
    The tail alpha_{n+2} is enclosed between consecutive truncations.
    """
    alpha = as_expr(alpha)
    target = Fraction(1, 1 << precision)
    depth = 16
    while True:
        expansion = cf_expand(alpha, n + 3 + depth, max_precision)
        terms = expansion.terms
        if len(terms) < n + 3:
            raise ValueError(f"expansion of {to_prefix(alpha)} too short for n={n}")
        reversed_head = _fold(list(reversed(terms[1 : n + 2])))
        tail_terms = terms[n + 2 :]
        if expansion.terminated:
            tail = Interval(_fold(tail_terms), _fold(tail_terms))
        else:
            second = _fold(tail_terms)
            first = _fold(tail_terms[:-1]) if len(tail_terms) > 1 else second + 1
            tail = Interval(min(first, second), max(first, second))
        rhs = Interval(
            1 / (1 + 1 / (tail.lo * reversed_head)),
            1 / (1 + 1 / (tail.hi * reversed_head)),
        )
        if expansion.terminated or rhs.width <= target:
            break
        depth *= 2
    convs = convergents(terms[: n + 2])
    distance = abs_expr(convs[n].q * alpha - convs[n].p, max_precision)
    lhs = evaluate(convs[n + 1].q * distance, precision, max_precision)
    return BasicRelationReport(n, lhs, rhs)


def limsup_estimate(alpha, count: int, max_precision: Optional[int] = None) -> float:
    """Largest product over the trailing half of the first ``count`` products."""
    products = dirichlet_products(alpha, count, max_precision)
    if not products:
        raise ValueError("no products available")
    window = products[len(products) // 2 :] or products
    return max(to_float(p.value) for p in window)


def cf_rows(alpha, count: int, max_precision: Optional[int] = None) -> List[dict]:
    """Per-index rows for the cf report."""
    alpha = as_expr(alpha)
    expansion = cf_expand(alpha, count + 1, max_precision)
    convs = convergents(expansion.terms)
    products = {p.n: p for p in dirichlet_products(alpha, count, max_precision)}
    rows = []
    for n, conv in enumerate(convs[:count]):
        row = {"n": n, "a_n": expansion.terms[n], "p_n": conv.p, "q_n": conv.q}
        product = products.get(n)
        if product is not None:
            row["distance"] = to_float(product.distance)
            row["product"] = to_float(product.value)
            try:
                row["relation_gap"] = float(basic_relation_check(alpha, n, max_precision=max_precision).gap)
            except ValueError:
                row["relation_gap"] = None
        rows.append(row)
    logger.info("Expanded %s", to_prefix(alpha), extra={"terms": len(rows)})
    return rows
