"""
Simultaneous approximation of a vector v in R^2: best-approximation chains,
the uniform approximation function psi2, and exact emptiness tests for
the cylinders Pi(v, Q, R) = {x in [0, Q], |x v - p| <= R}.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .. import config
from .exact import (
    FOUR_OVER_PI,
    TWO_OVER_SQRT3,
    DomainViolation,
    DSpectrumError,
    ExprLike,
    Outcome,
    PrecisionExhausted,
    RealExpr,
    UndecidedTie,
    as_expr,
    below_two_over_sqrt3,
    certified_ceil,
    certified_compare,
    certified_floor,
    format_rational,
    lit,
    lower_bound,
    nearest_int,
    sqrt,
    to_float,
    to_prefix,
)
from .lattice3 import LatticePoint, enumerate_ellipsoid


logger = logging.getLogger(__name__)

CHUNK = 1 << 16
# Absolute slack on float distances before exact confirmation
FLOAT_SLACK = 1e-9
# Nominal work of one ellipsoid enumeration, in scan steps
ELLIPSOID_COST = 4096


class SearchExhausted(DSpectrumError):
    """A bounded search ran out of budget without an answer."""

    def __init__(self, message: str, budget: int):
        super().__init__(f"{message} (budget {budget})")
        self.budget = budget


@dataclass(frozen=True)
class TargetVector:
    v1: RealExpr
    v2: RealExpr

    @classmethod
    def of(cls, v1: ExprLike, v2: ExprLike) -> "TargetVector":
        return cls(as_expr(v1), as_expr(v2))

    @property
    def rational(self) -> Optional[Tuple[Fraction, Fraction]]:
        a, b = self.v1.exact_value(), self.v2.exact_value()
        if a is None or b is None:
            return None
        return a, b

    def common_form(self) -> Tuple[int, int, int]:
        """(P1, P2, D) with v = (P1, P2)/D, D >= 1 and gcd(P1, P2, D) = 1."""
        rational = self.rational
        if rational is None:
            raise DomainViolation("common denominator requested for an irrational vector")
        a, b = rational
        den = a.denominator * b.denominator // math.gcd(a.denominator, b.denominator)
        return a.numerator * (den // a.denominator), b.numerator * (den // b.denominator), den

    def floats(self) -> Tuple[float, float]:
        rational = self.rational
        if rational is not None:
            return float(rational[0]), float(rational[1])
        return to_float(self.v1), to_float(self.v2)

    def __str__(self) -> str:
        return f"({to_prefix(self.v1)}, {to_prefix(self.v2)})"


@dataclass(frozen=True)
class Cylinder:
    v: TargetVector
    length: RealExpr
    radius2: RealExpr

    @property
    def radius(self) -> RealExpr:
        return sqrt(self.radius2)

    @property
    def volume_over_pi(self) -> RealExpr:
        return self.length * self.radius2


@dataclass(frozen=True)
class BestApproxRecord:
    n: int
    q: int
    p: Tuple[int, int]
    r2: RealExpr
    v_over_pi: Optional[RealExpr] = None
    ambiguous: bool = False

    @property
    def degenerate(self) -> bool:
        value = self.r2.exact_value()
        return value is not None and value == 0

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "q": str(self.q),
            "p": [str(self.p[0]), str(self.p[1])],
            "R2": exact_text(self.r2),
            "V_over_pi": None if self.v_over_pi is None else exact_text(self.v_over_pi),
            "ambiguous": self.ambiguous,
            "degenerate": self.degenerate,
        }


def exact_text(expr: RealExpr) -> str:
    value = expr.exact_value()
    return format_rational(value) if value is not None else to_prefix(expr)


# ---------------------------------------------------------------------------
# Projected lattice: Z^3 seen along the primitive axis (D, P1, P2)
# ---------------------------------------------------------------------------


def _euclid_rows(r0: list, r1: list, column: int) -> Tuple[list, list]:
    while r1[column] != 0:
        k = r0[column] // r1[column]
        r0 = [a - k * b for a, b in zip(r0, r1)]
        r0, r1 = r1, r0
    return r0, r1


def _norm2(row: Sequence[int]) -> int:
    return row[0] * row[0] + row[1] * row[1]


def projected_basis(P1: int, P2: int, D: int) -> Tuple[Tuple[int, int, int], Tuple[int, int, int]]:
    """
    Reduced basis of L' = {x P - D p} with each vector carrying its x-value.
    Rows are (m1, m2, x): the lattice point (x, p) projects to m = x P - D p.
    """
    top, zero = _euclid_rows([P1, P2, 1], [D, 0, 0], 0)
    second, _ = _euclid_rows(zero, [0, D, 0], 1)
    b1, b2 = top, second
    while True:
        if _norm2(b1) > _norm2(b2):
            b1, b2 = b2, b1
        dot = b1[0] * b2[0] + b1[1] * b2[1]
        mu = math.floor(Fraction(dot, _norm2(b1)) + Fraction(1, 2))
        if mu == 0:
            return tuple(b1), tuple(b2)
        b2 = [a - mu * b for a, b in zip(b2, b1)]


def enumerate_disk(basis, bound: int) -> Iterator[Tuple[int, int, int, int]]:
    """Yield (m1, m2, |m|^2, x) for every m in the lattice with |m|^2 <= bound."""
    b1, b2 = basis
    n1, n2 = _norm2(b1), _norm2(b2)
    dot = b1[0] * b2[0] + b1[1] * b2[1]
    mu = Fraction(dot, n1)
    perp = Fraction(n1 * n2 - dot * dot, n1)
    j_max = math.isqrt(math.floor(bound / perp)) + 1
    for j in range(-j_max, j_max + 1):
        rest = bound - j * j * perp
        if rest < 0:
            continue
        center = -j * mu
        span = math.isqrt(math.floor(rest / n1)) + 1
        for i in range(math.floor(center) - span, math.ceil(center) + span + 1):
            m1 = i * b1[0] + j * b2[0]
            m2 = i * b1[1] + j * b2[1]
            s = m1 * m1 + m2 * m2
            if s <= bound:
                yield m1, m2, s, i * b1[2] + j * b2[2]


# ---------------------------------------------------------------------------
# Cylinder emptiness
# ---------------------------------------------------------------------------


@dataclass
class CylinderReport:
    empty: bool
    engine: str
    witness: Optional[LatticePoint] = None
    boundary: List[LatticePoint] = field(default_factory=list)

    def lateral_boundary(self, length) -> List[LatticePoint]:
        return [u for u in self.boundary if 0 < u.x < length]


def _rational_inputs(Q: ExprLike, R2: ExprLike) -> Tuple[Optional[Fraction], Optional[Fraction]]:
    return as_expr(Q).exact_value(), as_expr(R2).exact_value()


def cylinder_int_empty(
    v: TargetVector, Q: ExprLike, R2: ExprLike, engine: str = "auto"
) -> CylinderReport:
    """
    Whether the interior of Pi(v, Q, sqrt(R2)) holds no integer point.
    Interior means 0 < x < Q and |x v - p|^2 < R2. Lattice points on the
    lateral surface or the end faces are returned in ``boundary``.
    """
    Q_value, R2_value = _rational_inputs(Q, R2)
    if Q_value is not None and Q_value <= 0 or R2_value is not None and R2_value < 0:
        raise DomainViolation("cylinder needs positive length and non-negative radius")
    rational = v.rational is not None and Q_value is not None and R2_value is not None
    if engine == "auto":
        if not rational:
            engine = "scan"
        else:
            _, _, D = v.common_form()
            costs = {}
            if math.ceil(Q_value) <= config.SCAN_LIMIT:
                costs["scan"] = math.ceil(Q_value)
            costs["disk"] = 4 * R2_value * D + 16
            if R2_value > 0:
                costs["ellipsoid"] = ELLIPSOID_COST
            engine = min(costs, key=costs.get)
    if engine in ("disk", "ellipsoid"):
        if not rational:
            raise DomainViolation(f"{engine} engine needs a rational vector, length and radius")
        if engine == "disk" or R2_value == 0:
            return _disk_engine(v, Q_value, R2_value)
        return _ellipsoid_engine(*v.common_form(), Q_value, R2_value)
    if engine != "scan":
        raise ValueError(f"Unknown cylinder engine: {engine!r}")
    if rational:
        return _scan_rational(v, Q_value, R2_value)
    return _scan_certified(v, as_expr(Q), as_expr(R2))


def cylinder_form(P1: int, P2: int, D: int, Q: Fraction, R2: Fraction):
    """
    Quadratic form and centre of the ellipsoid 4 y_x^2 / Q^2 + |y_x v - y_p|^2 / R2 <= 2
    around the midpoint of the axis; it contains the closed cylinder.
    """
    alpha = Fraction(4) / (Q * Q)
    beta = 1 / (R2 * D * D)
    form = (
        (alpha + beta * (P1 * P1 + P2 * P2), -beta * D * P1, -beta * D * P2),
        (-beta * D * P1, beta * D * D, Fraction(0)),
        (-beta * D * P2, Fraction(0), beta * D * D),
    )
    center = (Q / 2, Q * P1 / (2 * D), Q * P2 / (2 * D))
    return form, center


def _ellipsoid_engine(P1: int, P2: int, D: int, Q: Fraction, R2: Fraction) -> CylinderReport:
    form, center = cylinder_form(P1, P2, D, Q, R2)
    bound = R2 * D * D
    report = CylinderReport(empty=True, engine="ellipsoid")
    best: Optional[LatticePoint] = None
    for u in enumerate_ellipsoid(form, center, 2):
        if u.x < 0 or u.x > Q:
            continue
        s = (u.x * P1 - D * u.y) ** 2 + (u.x * P2 - D * u.z) ** 2
        if s > bound:
            continue
        if 0 < u.x < Q and s < bound:
            if best is None or u < best:
                best = u
        else:
            report.boundary.append(u)
    if best is not None:
        report.empty = False
        report.witness = best
    report.boundary.sort()
    return report


def _lift(x: int, m1: int, m2: int, P1: int, P2: int, D: int) -> LatticePoint:
    """The lattice point over residue data m at abscissa x."""
    return LatticePoint(x, (x * P1 - m1) // D, (x * P2 - m2) // D)


def _disk_engine(v: TargetVector, Q: Fraction, R2: Fraction) -> CylinderReport:
    P1, P2, D = v.common_form()
    bound = R2 * D * D
    report = CylinderReport(empty=True, engine="disk")
    best: Optional[LatticePoint] = None
    for m1, m2, s, x in enumerate_disk(projected_basis(P1, P2, D), math.floor(bound)):
        residue = x % D
        first = residue if residue > 0 else D
        if s < bound:
            if first < Q:
                candidate = _lift(first, m1, m2, P1, P2, D)
                if best is None or candidate < best:
                    best = candidate
        else:
            x_lateral = first
            while x_lateral < Q:
                report.boundary.append(_lift(x_lateral, m1, m2, P1, P2, D))
                x_lateral += D
        if residue == 0:
            report.boundary.append(_lift(0, m1, m2, P1, P2, D))
        if Q.denominator == 1 and (int(Q) - residue) % D == 0:
            report.boundary.append(_lift(int(Q), m1, m2, P1, P2, D))
    if best is not None:
        report.empty = False
        report.witness = best
    report.boundary.sort()
    return report


def _disk_points(center: Tuple[Fraction, Fraction], R2: Fraction) -> Iterator[Tuple[int, int, Fraction]]:
    """Integer p with |center - p|^2 <= R2, with the squared distance."""
    reach = math.isqrt(math.ceil(R2)) + 1
    c1, c2 = center
    for p1 in range(math.floor(c1) - reach, math.ceil(c1) + reach + 1):
        for p2 in range(math.floor(c2) - reach, math.ceil(c2) + reach + 1):
            dist2 = (c1 - p1) ** 2 + (c2 - p2) ** 2
            if dist2 <= R2:
                yield p1, p2, dist2


def _float_distances(v_float: Tuple[float, float], start: int, stop: int, limit: float):
    """
    Abscissae x in [start, stop) whose float distance from x v to the nearest
    integer point is within ``limit`` plus slack, with those distances.
    """
    xs = np.arange(start, stop, dtype=np.float64)
    r1 = xs * v_float[0]
    r1 -= np.rint(r1)
    r2 = xs * v_float[1]
    r2 -= np.rint(r2)
    dist = np.sqrt(r1 * r1 + r2 * r2)
    keep = np.nonzero(dist <= limit + _slack(v_float, stop))[0]
    return (keep + start).astype(np.int64), dist[keep]


def _slack(v_float: Tuple[float, float], stop: int) -> float:
    return FLOAT_SLACK * (1.0 + stop * (abs(v_float[0]) + abs(v_float[1])) * 1e-6)


def _scan_rational(v: TargetVector, Q: Fraction, R2: Fraction) -> CylinderReport:
    a, b = v.rational
    report = CylinderReport(empty=True, engine="scan")
    for p1, p2, _ in _disk_points((Fraction(0), Fraction(0)), R2):
        report.boundary.append(LatticePoint(0, p1, p2))
    x_stop = math.ceil(Q)
    radius = math.sqrt(R2)
    v_float = (float(a), float(b))
    for start in range(1, x_stop, CHUNK):
        xs, _ = _float_distances(v_float, start, min(start + CHUNK, x_stop), radius)
        for x in xs.tolist():
            for p1, p2, dist2 in _disk_points((x * a, x * b), R2):
                if dist2 < R2:
                    report.empty = False
                    report.witness = LatticePoint(x, p1, p2)
                    return report
                report.boundary.append(LatticePoint(x, p1, p2))
    if Q.denominator == 1:
        for p1, p2, _ in _disk_points((Q * a, Q * b), R2):
            report.boundary.append(LatticePoint(int(Q), p1, p2))
    report.boundary.sort()
    return report


def _scan_certified(v: TargetVector, Q: RealExpr, R2: RealExpr) -> CylinderReport:
    """Scan for irrational data: float prefilter, certified confirmation."""
    report = CylinderReport(empty=True, engine="scan")
    x_stop = certified_ceil(Q)
    radius = math.sqrt(max(to_float(R2), 0.0))
    v_float = v.floats()
    for start in range(1, x_stop, CHUNK):
        xs, _ = _float_distances(v_float, start, min(start + CHUNK, x_stop), radius)
        for x in xs.tolist():
            p1, _ = nearest_int(x * v.v1)
            p2, _ = nearest_int(x * v.v2)
            dist2 = (x * v.v1 - p1) ** 2 + (x * v.v2 - p2) ** 2
            outcome = certified_compare(dist2, R2).outcome
            if outcome is Outcome.UNDECIDED:
                raise PrecisionExhausted(f"cylinder membership at x={x} undecided", config.MAX_PRECISION)
            if outcome is Outcome.LESS:
                report.empty = False
                report.witness = LatticePoint(x, p1, p2)
                return report
            if outcome is Outcome.EQUAL:
                report.boundary.append(LatticePoint(x, p1, p2))
    return report


# ---------------------------------------------------------------------------
# Best-approximation chains
# ---------------------------------------------------------------------------


def _nearest_low(num: int, den: int) -> Tuple[int, bool]:
    """Nearest integer to num/den, ties to the lower neighbour; flags an exact tie."""
    return -((den - 2 * num) // (2 * den)), (2 * num) % (2 * den) == den


def _closest_at(x: int, P1: int, P2: int, D: int) -> Tuple[Tuple[int, int], int, bool]:
    """Lexicographically smallest nearest p to x v and D^2 |x v - p|^2."""
    p1, tie1 = _nearest_low(x * P1, D)
    p2, tie2 = _nearest_low(x * P2, D)
    return (p1, p2), (x * P1 - D * p1) ** 2 + (x * P2 - D * p2) ** 2, tie1 or tie2


def _next_by_disk(basis, P1: int, P2: int, D: int, s_bound: int):
    best_x = None
    for _, _, _, x in enumerate_disk(basis, s_bound - 1):
        residue = x % D or D
        if best_x is None or residue < best_x:
            best_x = residue
    if best_x is None:
        return None
    p, s, ambiguous = _closest_at(best_x, P1, P2, D)
    return best_x, p, s, ambiguous


def _next_by_scan(P1: int, P2: int, D: int, s_bound: int, start: int, stop: int):
    v_float = (P1 / D, P2 / D)
    limit = math.sqrt(s_bound) / D
    for chunk_start in range(start, stop, CHUNK):
        xs, _ = _float_distances(v_float, chunk_start, min(chunk_start + CHUNK, stop), limit)
        for x in xs.tolist():
            p, s, ambiguous = _closest_at(x, P1, P2, D)
            if s < s_bound:
                return x, p, s, ambiguous
    return None


def _next_by_ellipsoid(P1: int, P2: int, D: int, s_bound: int):
    # A symmetric cylinder of volume above 8 holds a nonzero point (Minkowski)
    reach = Fraction(4 * D * D // (3 * s_bound) + 2)
    report = _ellipsoid_engine(P1, P2, D, reach, Fraction(s_bound, D * D))
    if report.witness is None:
        return None
    p, s, ambiguous = _closest_at(report.witness.x, P1, P2, D)
    return report.witness.x, p, s, ambiguous


def _rational_chain(v: TargetVector, q_max: int) -> List[BestApproxRecord]:
    P1, P2, D = v.common_form()
    p, s, ambiguous = _closest_at(1, P1, P2, D)
    q = 1
    steps = [(q, p, s, ambiguous)]
    basis = None
    while s > 0 and q < q_max:
        remaining = q_max - q
        costs = {}
        if remaining <= config.SCAN_LIMIT:
            costs["scan"] = remaining
        costs["disk"] = 4 * s // D + 16
        costs["ellipsoid"] = ELLIPSOID_COST
        how = min(costs, key=costs.get)
        if how == "disk":
            if basis is None:
                basis = projected_basis(P1, P2, D)
            found = _next_by_disk(basis, P1, P2, D, s)
        elif how == "ellipsoid":
            found = _next_by_ellipsoid(P1, P2, D, s)
        else:
            found = _next_by_scan(P1, P2, D, s, q + 1, q_max + 1)
        if found is None or found[0] > q_max:
            break
        q, p, s, ambiguous = found
        steps.append(found)
    records = []
    for n, (q, p, s, ambiguous) in enumerate(steps):
        r2 = lit(Fraction(s, D * D))
        v_over_pi = steps[n + 1][0] * r2 if n + 1 < len(steps) else None
        records.append(BestApproxRecord(n, q, p, r2, v_over_pi, ambiguous))
    return records


def _irrational_chain(v: TargetVector, q_max: int, max_precision: Optional[int]) -> List[BestApproxRecord]:
    if q_max > 10**8:
        logger.warning("Irrational chain scan up to %s will be slow", q_max)
    v_float = v.floats()

    def exact_at(x: int):
        p1, _ = nearest_int(x * v.v1, max_precision)
        p2, _ = nearest_int(x * v.v2, max_precision)
        return (p1, p2), (x * v.v1 - p1) ** 2 + (x * v.v2 - p2) ** 2

    p, best = exact_at(1)
    best_dist = math.sqrt(to_float(best))
    steps = [(1, p, best)]
    for start in range(2, q_max + 1, CHUNK):
        stop = min(start + CHUNK, q_max + 1)
        xs, dists = _float_distances(v_float, start, stop, best_dist)
        slack = _slack(v_float, stop)
        for x, dist in zip(xs.tolist(), dists.tolist()):
            if dist > best_dist + slack:
                continue
            p, dist2 = exact_at(x)
            outcome = certified_compare(dist2, best, max_precision).outcome
            if outcome is Outcome.UNDECIDED:
                raise UndecidedTie(f"best approximation at q={x} undecided")
            if outcome is Outcome.LESS:
                steps.append((x, p, dist2))
                best, best_dist = dist2, math.sqrt(to_float(dist2))
    records = []
    for n, (q, p, r2) in enumerate(steps):
        v_over_pi = steps[n + 1][0] * r2 if n + 1 < len(steps) else None
        records.append(BestApproxRecord(n, q, p, r2, v_over_pi))
    return records


def best_approx_seq(v: TargetVector, q_max: int, max_precision: Optional[int] = None) -> List[BestApproxRecord]:
    """
    Best-approximation chain of v up to q_max. A rational v ends its chain
    once the distance reaches exactly zero (the record is ``degenerate``).
    """
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    if v.rational is not None:
        records = _rational_chain(v, q_max)
        if records[-1].degenerate:
            logger.info("Chain of rational %s is degenerate at q=%s", v, records[-1].q)
    else:
        records = _irrational_chain(v, q_max, max_precision)
    logger.info("Best approximations of %s", v, extra={"q_max": q_max, "records": len(records)})
    return records


@dataclass(frozen=True)
class Psi2Value:
    value: RealExpr
    q: int
    p: Tuple[int, int]
    degenerate: bool


def psi2(v: TargetVector, t: ExprLike, max_precision: Optional[int] = None) -> Psi2Value:
    """min over 1 <= q <= t of the distance from q v to Z^2. A float t is taken exactly."""
    if isinstance(t, float):
        t = Fraction(t)
    t_int = t if isinstance(t, int) else certified_floor(t, max_precision)
    if t_int < 1:
        raise ValueError("t must be at least 1")
    last = best_approx_seq(v, t_int, max_precision)[-1]
    return Psi2Value(sqrt(last.r2), last.q, last.p, last.degenerate)


# ---------------------------------------------------------------------------
# Chain validation and spectrum bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainValidation:
    passed: bool
    failed_condition: Optional[int] = None
    index: Optional[int] = None
    detail: str = ""


def validate_best_approx(chain: Sequence[BestApproxRecord], v: TargetVector) -> ChainValidation:
    """
    Check (1) q_0 = 1, (3) strictly increasing q, (4) strictly decreasing
    R_n = |q_{n-1} v - p_{n-1}| with R_0 = 1, then (2) empty interiors of
    Pi(v, q_n, R_n). Structural conditions are checked first.
    """
    if not chain:
        return ChainValidation(False, 1, 0, "empty chain")
    if chain[0].q != 1:
        return ChainValidation(False, 1, 0, f"q_0 = {chain[0].q}")
    for n in range(1, len(chain)):
        if chain[n].q <= chain[n - 1].q:
            return ChainValidation(False, 3, n, f"q_{n} = {chain[n].q} <= q_{n - 1} = {chain[n - 1].q}")

    radii2: List[RealExpr] = [lit(1)]
    for record in chain[:-1]:
        radii2.append((record.q * v.v1 - record.p[0]) ** 2 + (record.q * v.v2 - record.p[1]) ** 2)
    for n in range(1, len(radii2)):
        outcome = certified_compare(radii2[n], radii2[n - 1]).outcome
        if outcome is Outcome.UNDECIDED:
            raise PrecisionExhausted(f"radius comparison at n={n} undecided", config.MAX_PRECISION)
        if outcome is not Outcome.LESS:
            return ChainValidation(False, 4, n, f"R_{n} is not below R_{n - 1}")

    for n, record in enumerate(chain):
        report = cylinder_int_empty(v, record.q, radii2[n])
        if not report.empty:
            return ChainValidation(False, 2, n, f"interior point {report.witness}")
    return ChainValidation(True)


@dataclass(frozen=True)
class SpectrumReport:
    products: List[RealExpr]
    max_index: Optional[int]
    max_product: Optional[RealExpr]
    below_minkowski: bool
    below_mahler: bool
    degenerate: bool


def below_bound(product: ExprLike, bound: RealExpr) -> bool:
    """Certified product < bound."""
    product = as_expr(product)
    value = product.exact_value()
    if value is not None:
        if bound is TWO_OVER_SQRT3:
            return below_two_over_sqrt3(value)
        if value < lower_bound(bound):
            return True
    outcome = certified_compare(product, bound).outcome
    if outcome is Outcome.UNDECIDED:
        raise PrecisionExhausted("spectrum bound comparison undecided", config.MAX_PRECISION)
    return outcome is Outcome.LESS


def spectrum_bounds_check(
    v: TargetVector, q_max: int, chain: Optional[Sequence[BestApproxRecord]] = None
) -> SpectrumReport:
    """
    Products q_{n+1}|q_n v - p_n|^2 along the chain of v: all must lie below
    4/pi, and for v off rational lines they stay below 2/sqrt(3) eventually.
    A precomputed ``chain`` is reused as is.
    """
    if chain is None:
        chain = best_approx_seq(v, q_max)
    products = [r.v_over_pi for r in chain if r.v_over_pi is not None]
    max_index = None
    if products:
        max_index = int(np.argmax([to_float(p) for p in products]))
    below_minkowski = all(below_bound(p, FOUR_OVER_PI) for p in products)
    below_mahler = all(below_bound(p, TWO_OVER_SQRT3) for p in products)
    if not below_minkowski:
        logger.error("Product above 4/pi for %s", v)
    return SpectrumReport(
        products,
        max_index,
        products[max_index] if max_index is not None else None,
        below_minkowski,
        below_mahler,
        chain[-1].degenerate,
    )
