"""
Constructive search for vectors whose Dirichlet products land in
prescribed target intervals.

Each step starts from the last chain point w_{n-1}, normalises the lattice
with a frame so that the plane through w_{n-1} becomes z = 0, and looks for
the next point w_n on a neighbouring plane inside a thin strip of the A2
chart. A candidate is kept only when every chain property is verified in
exact rational arithmetic in original coordinates.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .. import config
from .approx2d import SearchExhausted, TargetVector, best_approx_seq, cylinder_int_empty, Cylinder
from .exact import (
    TWO_OVER_SQRT3,
    DomainViolation,
    DSpectrumError,
    ExprLike,
    Outcome,
    PrecisionExhausted,
    RealExpr,
    as_expr,
    below_two_over_sqrt3,
    certified_ceil,
    certified_compare,
    certified_floor,
    compare_or_raise,
    format_rational,
    lit,
    lower_bound,
    sqrt,
    to_float,
    to_prefix,
    upper_bound,
)
from .lattice3 import ORIGIN_STEP, Frame, LatticePoint, build_frame


logger = logging.getLogger(__name__)

MAX_HALVINGS = 64
# Fractions of the target width by which lambda* is moved off the midpoint
LAMBDA_OFFSETS = (
    Fraction(0),
    Fraction(-3, 8),
    Fraction(3, 8),
    Fraction(-1, 4),
    Fraction(1, 4),
    Fraction(-1, 8),
    Fraction(1, 8),
)
SEARCH_ROUNDS = 3
# A hit within this many strips of the starting strip ends the lambda* sweep
GOOD_ENOUGH_K = 2


class NoEpsilonFound(DSpectrumError):
    pass


class ConstructionAborted(DSpectrumError):
    pass


class MarginTooSmall(DSpectrumError):
    pass


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------


class Chart(enum.Enum):
    A0 = 0
    A1 = 1
    A2 = 2


@dataclass(frozen=True)
class ChartContext:
    """The frame data the charts depend on: q, h and, for B2, the shift a."""

    q: int
    h: RealExpr
    a: Optional[int] = None

    @classmethod
    def of(cls, q: int, h: ExprLike, a: Optional[int] = None) -> "ChartContext":
        return cls(q, as_expr(h), a)

    @classmethod
    def from_frame(cls, frame: Frame) -> "ChartContext":
        return cls(frame.q, frame.h, frame.a)

    @property
    def d(self) -> RealExpr:
        return 1 / (self.q * self.h)


@dataclass(frozen=True)
class ParamPoint:
    chart: Chart
    x: RealExpr
    y: RealExpr
    z: RealExpr

    @classmethod
    def of(cls, chart: Chart, x: ExprLike, y: ExprLike, z: ExprLike) -> "ParamPoint":
        return cls(chart, as_expr(x), as_expr(y), as_expr(z))

    def __str__(self) -> str:
        return f"{self.chart.name}({to_prefix(self.x)}, {to_prefix(self.y)}, {to_prefix(self.z)})"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainViolation(message)


def validate_domain(p: ParamPoint, ctx: ChartContext) -> None:
    _require(compare_or_raise(p.y, 0) > 0, f"{p}: y must be positive")
    if p.chart is Chart.A0:
        _require(compare_or_raise(p.x, ctx.q) == 0, f"{p}: x must equal q")
        _require(compare_or_raise(p.z, 0) > 0, f"{p}: z must be positive")
    elif p.chart is Chart.A1:
        _require(compare_or_raise(p.x, 0) > 0, f"{p}: x must be positive")
        _require(compare_or_raise(p.z, ctx.h) == 0, f"{p}: z must equal h")
    else:
        _require(compare_or_raise(p.x, 0) > 0, f"{p}: x must be positive")
        _require(compare_or_raise(p.z, 0) == 0, f"{p}: z must be 0")


def reparam(p: ParamPoint, target: Chart, ctx: ChartContext) -> ParamPoint:
    """Move a point between the charts A0, A1 and A2 (all maps are exact)."""
    validate_domain(p, ctx)
    if p.chart is target:
        return p
    q, h = ctx.q, ctx.h
    x, y, z = p.x, p.y, p.z
    if p.chart is Chart.A1:
        if target is Chart.A2:
            return ParamPoint.of(Chart.A2, q * y / h, q * (y * y + h * h) / (x * h), 0)
        return ParamPoint.of(Chart.A0, q, q * y / x, q * h / x)
    if p.chart is Chart.A2:
        s = x * x + q * q
        if target is Chart.A1:
            return ParamPoint.of(Chart.A1, h * s / (y * q), h * x / q, h)
        return ParamPoint.of(Chart.A0, q, q * x * y / s, q * q * y / s)
    if target is Chart.A1:
        return ParamPoint.of(Chart.A1, q * h / z, h * y / z, h)
    return ParamPoint.of(Chart.A2, q * y / z, (y * y + z * z) / z, 0)


def cylinder_of(p: ParamPoint, ctx: ChartContext) -> Cylinder:
    """The frame-coordinate cylinder whose axis passes through p."""
    validate_domain(p, ctx)
    q, h = ctx.q, ctx.h
    x, y, z = p.x, p.y, p.z
    if p.chart is Chart.A0:
        return Cylinder(TargetVector(y / q, z / q), q * h / z, y * y + z * z)
    if p.chart is Chart.A1:
        return Cylinder(TargetVector(y / x, h / x), x, q * q * (y * y + h * h) / (x * x))
    s = x * x + q * q
    return Cylinder(TargetVector(x * y / s, q * y / s), h * s / (q * y), q * q * y * y / s)


@dataclass(frozen=True)
class FamilyConstraint:
    """The one-parameter family on which V/pi = 2r/d."""

    r: RealExpr
    ctx: ChartContext

    def residual(self, p: ParamPoint) -> RealExpr:
        q, h, r = self.ctx.q, self.ctx.h, self.r
        if p.chart is Chart.A1:
            return p.x - q * (p.y * p.y + h * h) / (2 * r * h)
        if p.chart is Chart.A2:
            return p.y - 2 * r
        return p.y * p.y + (p.z - r) * (p.z - r) - r * r

    def contains(self, p: ParamPoint) -> bool:
        return compare_or_raise(self.residual(p), 0) == 0

    @property
    def volume_over_pi(self) -> RealExpr:
        return 2 * self.r / self.ctx.d


def family_r(r: ExprLike, ctx: ChartContext) -> FamilyConstraint:
    r = as_expr(r)
    _require(compare_or_raise(r, 0) > 0, "family parameter r must be positive")
    return FamilyConstraint(r, ctx)


# ---------------------------------------------------------------------------
# B2 and the epsilon rectangle
# ---------------------------------------------------------------------------


def b2_contains(p: ParamPoint, ctx: ChartContext, max_precision: Optional[int] = None) -> bool:
    """
    Whether the open infinite cylinder through the A2 point p misses every
    nonzero point (i q + j a, j d, 0) of the plane lattice.
    """
    _require(p.chart is Chart.A2, f"{p} is not an A2 point")
    _require(ctx.a is not None, "B2 membership needs the frame shift a")
    validate_domain(p, ctx)
    q, a, d = ctx.q, ctx.a, ctx.d
    x2, y2 = p.x, p.y
    s = x2 * x2 + q * q
    rhs = q * q * y2 * y2 * s
    j_max = certified_ceil(2 * y2 / d, max_precision) + 1
    x_reach = certified_ceil(x2, max_precision) + q
    for j in range(-j_max, j_max + 1):
        if j == 0:
            # no point of the j = 0 line is strictly inside
            continue
        i_lo = -((j * a + x_reach) // q)
        i_hi = (x_reach - j * a) // q
        for i in range(i_lo, i_hi + 1):
            X = i * q + j * a
            lhs = (X * x2 * y2 - j * d * s) ** 2 + (X * q * y2) ** 2
            outcome = certified_compare(lhs, rhs, max_precision).outcome
            if outcome is Outcome.UNDECIDED:
                raise PrecisionExhausted(f"B2 membership of {p} undecided at ({X}, {j})", max_precision or config.MAX_PRECISION)
            if outcome is Outcome.LESS:
                return False
    return True


def epsilon_search(ctx: ChartContext, lam: ExprLike, max_precision: Optional[int] = None) -> Fraction:
    """Largest eps = q/2^k (k >= 2) with both points lam*(a + q/2 -+ eps, d) in B2."""
    lam = as_expr(lam)
    _require(compare_or_raise(lam, 0) > 0, "lambda* must be positive")
    _require(compare_or_raise(lam, TWO_OVER_SQRT3) < 0, "lambda* must be below 2/sqrt(3)")
    centre = ctx.a + Fraction(ctx.q, 2)
    eps = Fraction(ctx.q, 4)
    y2 = lam * ctx.d
    for _ in range(MAX_HALVINGS):
        left = ParamPoint.of(Chart.A2, lam * (centre - eps), y2, 0)
        right = ParamPoint.of(Chart.A2, lam * (centre + eps), y2, 0)
        if b2_contains(left, ctx, max_precision) and b2_contains(right, ctx, max_precision):
            return eps
        eps /= 2
    raise NoEpsilonFound(f"no epsilon for lambda*={to_prefix(lam)} after {MAX_HALVINGS} halvings")


def strip_bounds(ctx: ChartContext, lam: ExprLike, eps: Fraction, k: int) -> Tuple[Tuple[RealExpr, RealExpr], Tuple[RealExpr, RealExpr]]:
    """The k-th strip of the eps-rectangle in A2: (x2 range, y2 range)."""
    lam = as_expr(lam)
    top = lam * (ctx.a + Fraction(2 * k + 1, 2) * ctx.q)
    y_top = lam * ctx.d
    return (top - eps, top), (y_top * (1 - eps / (top + eps)), y_top)


def strip_gap(frame: Frame, lam: ExprLike, eps: Fraction, k: int) -> float:
    """Width of the x-range of strip k on its top line: (X^2 + q^2) eps / (n2 lam X)."""
    lam_f = to_float(lam)
    q = frame.q
    top = lam_f * (frame.a + (k + 0.5) * q)
    return (top * top + q * q) * float(eps) / (frame.norm2 * lam_f * top)


def gap_k_min(frame: Frame, lam: ExprLike, eps: Fraction) -> int:
    """
    Smallest k whose strip's x-gap exceeds 2q, which guarantees a lattice
    point on every plane line crossing the strip.
    """
    lam_f = to_float(lam)
    q, n2 = frame.q, frame.norm2
    # gap(X) increases once X > q
    target = 2 * q * n2 * lam_f / float(eps)
    x_needed = max(float(q), (target + math.sqrt(max(target * target - 4 * q * q, 0.0))) / 2)
    k = max(0, math.ceil((x_needed / lam_f - frame.a) / q - 0.5))
    while strip_gap(frame, lam, eps, k) <= 2 * q:
        k += 1
    return k


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetInterval:
    """Closed rational interval inside [0, 2/sqrt(3)]; ``hi=None`` means 2/sqrt(3)."""

    lo: Fraction
    hi: Optional[Fraction] = None

    def __post_init__(self):
        if self.lo < 0:
            raise DomainViolation(f"target lower end {self.lo} is negative")
        if self.hi is not None and not below_two_over_sqrt3(self.hi):
            raise DomainViolation(f"target upper end {self.hi} is not below 2/sqrt(3)")
        if self.lo >= self.upper_rational:
            raise DomainViolation("target interval is empty")

    @property
    def upper_rational(self) -> Fraction:
        return self.hi if self.hi is not None else lower_bound(TWO_OVER_SQRT3)

    @property
    def width(self) -> Fraction:
        return self.upper_rational - self.lo

    def contains_interior(self, value: Fraction) -> bool:
        if value <= self.lo:
            return False
        return value < self.hi if self.hi is not None else below_two_over_sqrt3(value)

    def as_dict(self) -> dict:
        return {
            "lo": format_rational(self.lo),
            "hi": format_rational(self.hi) if self.hi is not None else "2/sqrt(3)",
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TargetInterval":
        hi = data.get("hi")
        return cls(Fraction(data["lo"]), None if hi in (None, "2/sqrt(3)") else Fraction(hi))


def inner_interval(lam: ExprLike, halfwidth: ExprLike) -> TargetInterval:
    """[lam - hw, lam + hw] clipped to [0, 2/sqrt(3)], shrunk to rational endpoints."""
    lam, halfwidth = as_expr(lam), as_expr(halfwidth)
    lo_expr, hi_expr = lam - halfwidth, lam + halfwidth
    if compare_or_raise(lo_expr, 0) <= 0:
        lo = Fraction(0)
    else:
        lo = lo_expr.exact_value() if lo_expr.is_rational else upper_bound(lo_expr)
    if compare_or_raise(hi_expr, TWO_OVER_SQRT3) >= 0:
        hi = None
    else:
        hi = hi_expr.exact_value() if hi_expr.is_rational else lower_bound(hi_expr)
    return TargetInterval(lo, hi)


def constant_targets(lam: ExprLike, halfwidth: ExprLike, n: int) -> List[TargetInterval]:
    return [inner_interval(lam, halfwidth)] * n


def shrinking_targets(lam: ExprLike, n: int) -> List[TargetInterval]:
    """Delta_m = [lam - 1/m, lam + 1/m] clipped, for m = 1 .. n."""
    return [inner_interval(lam, Fraction(1, m)) for m in range(1, n + 1)]


# ---------------------------------------------------------------------------
# Chain properties
# ---------------------------------------------------------------------------

PROPERTY_NAMES = {
    1: "empty cylinders",
    2: "increasing denominators",
    3: "radius halving",
    4: "volume in target",
    5: "vector drift",
    6: "radius drift",
}


@dataclass
class StepCertificate:
    n: int
    properties: Dict[int, bool] = field(default_factory=dict)
    failed_property: Optional[int] = None
    radii2: List[Fraction] = field(default_factory=list)
    volumes: List[Fraction] = field(default_factory=list)
    drift2: Optional[Fraction] = None
    lateral_boundary: Dict[int, List[LatticePoint]] = field(default_factory=dict)
    engines: Dict[int, str] = field(default_factory=dict)
    branch: Optional[int] = None
    side: Optional[int] = None
    b2: Optional[bool] = None
    k: Optional[int] = None
    k_guaranteed: Optional[int] = None
    epsilon: Optional[Fraction] = None
    lambda_star: Optional[RealExpr] = None

    @property
    def passed(self) -> bool:
        return self.failed_property is None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "branch": self.branch,
            "side": self.side,
            "k": self.k,
            "k_guaranteed": self.k_guaranteed,
            "epsilon": format_rational(self.epsilon) if self.epsilon is not None else None,
            "lambda_star": to_prefix(self.lambda_star) if self.lambda_star is not None else None,
            "properties": {str(key): value for key, value in sorted(self.properties.items())},
            "R2": [format_rational(r) for r in self.radii2],
            "V_over_pi": [format_rational(v) for v in self.volumes],
            "drift2": format_rational(self.drift2) if self.drift2 is not None else None,
            "engines": {str(key): value for key, value in sorted(self.engines.items())},
            "lateral_boundary": {
                str(key): [[str(c) for c in u] for u in points]
                for key, points in sorted(self.lateral_boundary.items())
            },
            "b2": self.b2,
        }


def vector_of(u: LatticePoint) -> Tuple[Fraction, Fraction]:
    return Fraction(u.y, u.x), Fraction(u.z, u.x)


def radii2_for(points: Sequence[LatticePoint], v: Tuple[Fraction, Fraction]) -> List[Fraction]:
    """(R^nu)^2 = |q_{nu-1} v - p_{nu-1}|^2 for nu = 0 .. len(points)-1, with R^0 = 1."""
    radii2 = [Fraction(1)]
    for prev in points[:-1]:
        radii2.append((prev.x * v[0] - prev.y) ** 2 + (prev.x * v[1] - prev.z) ** 2)
    return radii2


def _sqrt_gap_below(a: Fraction, b: Fraction, c: Fraction) -> bool:
    """Exact |sqrt(a) - sqrt(b)| < c for a, b >= 0, c > 0."""
    lhs = a + b - c * c
    if lhs < 0:
        return True
    return lhs * lhs < 4 * a * b


def check_properties(
    points: Sequence[LatticePoint], targets: Sequence[TargetInterval], engine: str = "auto"
) -> StepCertificate:
    """
    Verify the chain properties for w_0 .. w_n in exact arithmetic:
    (2) increasing x, (4) q_nu R^2 inside Delta_nu, (3) R^nu < R^(nu-1)/2,
    (5) |v_n - v_{n-1}| < 2^-n / 2, (6) |R_n^nu - R_{n-1}^nu| < 2^-n / 2,
    then (1) empty interiors of Pi(v_n, q_nu, R^nu) for 0 <= nu <= n.
    """
    n = len(points) - 1
    cert = StepCertificate(n)

    def fail(prop: int) -> StepCertificate:
        cert.properties[prop] = False
        cert.failed_property = prop
        return cert

    if points[0] != ORIGIN_STEP:
        return fail(2)
    for nu in range(1, n + 1):
        if points[nu].x <= points[nu - 1].x:
            return fail(2)
    cert.properties[2] = True
    if n == 0:
        cert.properties.update({1: True, 3: True, 4: True, 5: True, 6: True})
        return cert

    v = vector_of(points[n])
    radii2 = radii2_for(points, v)
    cert.radii2 = radii2
    cert.volumes = [points[nu].x * radii2[nu] for nu in range(1, n + 1)]
    for nu in range(1, n + 1):
        if not targets[nu - 1].contains_interior(cert.volumes[nu - 1]):
            return fail(4)
    cert.properties[4] = True

    for nu in range(1, n + 1):
        if not 4 * radii2[nu] < radii2[nu - 1]:
            return fail(3)
    cert.properties[3] = True

    bound = Fraction(1, 2 ** (n + 1))
    v_prev = vector_of(points[n - 1])
    cert.drift2 = (v[0] - v_prev[0]) ** 2 + (v[1] - v_prev[1]) ** 2
    if not cert.drift2 < bound * bound:
        return fail(5)
    cert.properties[5] = True

    previous = radii2_for(points[:-1], v_prev)
    for nu in range(1, n):
        if not _sqrt_gap_below(radii2[nu], previous[nu], bound):
            return fail(6)
    cert.properties[6] = True

    target = TargetVector(lit(v[0]), lit(v[1]))
    for nu in range(n, 0, -1):
        report = cylinder_int_empty(target, points[nu].x, radii2[nu], engine)
        cert.engines[nu] = report.engine
        if not report.empty:
            logger.debug("Cylinder %s of step %s holds %s", nu, n, report.witness)
            return fail(1)
        lateral = [u for u in report.lateral_boundary(points[nu].x) if u != points[nu - 1]]
        if lateral:
            cert.lateral_boundary[nu] = lateral
    cert.properties[1] = True
    return cert


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


@dataclass
class ConstructionState:
    targets: List[TargetInterval]
    points: List[LatticePoint] = field(default_factory=lambda: [ORIGIN_STEP])
    certificates: List[StepCertificate] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def v(self) -> Tuple[Fraction, Fraction]:
        return vector_of(self.points[-1])


@dataclass(frozen=True)
class KCandidate:
    k: int
    u: LatticePoint
    certificate: StepCertificate


def lambda_star(target: TargetInterval, frame: Frame, offset: Fraction = Fraction(0)) -> RealExpr:
    """
    Midpoint of the target moved by ``offset`` widths, plus a small multiple
    of sqrt(2) d so that strip positions do not repeat periodically.
    """
    width = target.width
    centre = target.lo + width / 2 + offset * width
    return centre + width / (32 * frame.q) * sqrt(2 * frame.norm2)


def admissible_k_search(
    frame: Frame,
    lam: ExprLike,
    eps: Fraction,
    k_min: int,
    accept: Callable[[LatticePoint], Optional[StepCertificate]],
    k_budget: int,
    volume_floor: Optional[ExprLike] = None,
    x_floor: int = 0,
    x_cap: Optional[int] = None,
) -> KCandidate:
    """
    Scan strips k = k_min, k_min+1, ... and return the first lattice point on
    the level +1 plane that lies in a strip and passes ``accept``.
    In A2 the point's x-coordinate is its integer Y index, and its cylinder
    volume is V/pi = (Y^2 + q^2) / (norm2 * x).
    """
    lam = as_expr(lam)
    q, a, n2, b_index = frame.q, frame.a, frame.norm2, frame.b_index
    for k in range(k_min, k_min + k_budget):
        top = lam * (a + Fraction(2 * k + 1, 2) * q)
        j_lo = certified_ceil((top - eps - b_index) / n2)
        j_hi = certified_floor((top - b_index) / n2)
        for j in range(j_lo, j_hi + 1):
            Y = j * n2 + b_index
            base = Y * Y + q * q
            x_lo = certified_ceil(base / (n2 * lam))
            x_hi = certified_floor(base * (top + eps) / (n2 * lam * top))
            if volume_floor is not None:
                x_hi = min(x_hi, certified_floor(base / (n2 * as_expr(volume_floor))))
            x_lo = max(x_lo, x_floor)
            if x_cap is not None and x_lo > x_cap:
                raise SearchExhausted(f"strip {k} lies beyond the denominator cap {x_cap}", k - k_min)
            offset = frame.w0p.x + j * a
            i_lo = -((offset - x_lo) // q)
            i_hi = (x_hi - offset) // q
            for i in range(i_lo, i_hi + 1):
                u = frame.point(i, j, 1)
                certificate = accept(u)
                if certificate is not None:
                    return KCandidate(k, u, certificate)
    raise SearchExhausted(f"no admissible strip for w={frame.w}", k_budget)


def step_frame(points: Sequence[LatticePoint], branch: int) -> Frame:
    """
    Frame at w_{n-1}. It is mirrored when w_{n-2} has a negative Y index, so
    that the strip lies on the side of w_{n-2} and w_{n-1} - w_{n-2} stays
    outside the limiting cylinder of w_{n-1}.
    """
    frame = build_frame(points[-1], branch)
    if len(points) >= 2 and frame.y_index(points[-2]) < 0:
        frame = build_frame(points[-1], branch, side=-1)
    return frame


def a2_point(frame: Frame, u: LatticePoint) -> ParamPoint:
    """The A2 point of a level +1 candidate: (Y, h (Y^2 + q^2) / (q x), 0)."""
    Y, q = frame.y_index(u), frame.q
    return ParamPoint.of(Chart.A2, Y, frame.h * Fraction(Y * Y + q * q, q * u.x), 0)


def step(state: ConstructionState, branch: int, k_budget: Optional[int] = None, q_cap: Optional[int] = None) -> ConstructionState:
    """
    Extend the chain by one point w_n on the neighbour plane chosen by ``branch``.

    Strips are scanned from the gap-guaranteed k; each retry round doubles the
    starting strip and the budget. Only candidates whose A2 point lies in B2
    and whose chain passes every property are kept.
    """
    n = state.n + 1
    if n > len(state.targets):
        raise ValueError(f"no target interval for step {n}")
    target = state.targets[n - 1]
    k_budget = k_budget or config.K_BUDGET
    q_cap = q_cap or config.Q_CAP
    frame = step_frame(state.points, branch)
    ctx = ChartContext.from_frame(frame)
    x_floor = state.points[-1].x + 1

    def accept(u: LatticePoint) -> Optional[StepCertificate]:
        if u.x > q_cap or frame.y_index(u) <= 0:
            return None
        if not b2_contains(a2_point(frame, u), ctx):
            return None
        certificate = check_properties(state.points + [u], state.targets)
        return certificate if certificate.passed else None

    best: Optional[Tuple[KCandidate, RealExpr, Fraction, int]] = None
    for round_index in range(SEARCH_ROUNDS):
        budget = k_budget * 2 ** round_index
        for offset in LAMBDA_OFFSETS:
            lam = lambda_star(target, frame, offset)
            try:
                eps = epsilon_search(ctx, lam)
            except NoEpsilonFound:
                logger.warning("No epsilon at step %s for lambda*=%s", n, to_prefix(lam))
                continue
            k_guaranteed = gap_k_min(frame, lam, eps)
            k_start = k_guaranteed if round_index == 0 else max(k_guaranteed, 1) * 2 ** round_index
            x_cap = q_cap if best is None else min(q_cap, best[0].u.x)
            volume_floor = target.lo + (lam - target.lo) / 4
            try:
                found = admissible_k_search(frame, lam, eps, k_start, accept, budget, volume_floor, x_floor, x_cap)
            except SearchExhausted:
                continue
            if best is None or found.u.x < best[0].u.x:
                best = (found, lam, eps, k_guaranteed)
            if found.k - k_start <= GOOD_ENOUGH_K:
                break
        if best is not None:
            break
        logger.warning("Step %s: no admissible strip within %s strips, widening", n, budget)
    if best is None:
        raise ConstructionAborted(f"step {n}: no admissible point after {SEARCH_ROUNDS} rounds")

    found, lam, eps, k_guaranteed = best
    certificate = replace(
        found.certificate,
        branch=branch,
        side=frame.side,
        b2=True,
        k=found.k,
        k_guaranteed=k_guaranteed,
        epsilon=eps,
        lambda_star=lam,
    )
    logger.info(
        "Step %s accepted w=%s",
        n,
        found.u,
        extra={"k": found.k, "k_guaranteed": k_guaranteed, "branch": branch, "side": frame.side, "q": found.u.x},
    )
    return ConstructionState(state.targets, state.points + [found.u], state.certificates + [certificate])


def branch_bit(branch_bits: int, n: int) -> int:
    """Branch for step n (1-based): bit n-1 of the mask."""
    return (branch_bits >> (n - 1)) & 1


@dataclass
class ConstructionResult:
    state: ConstructionState
    branch_bits: int

    @property
    def v(self) -> Tuple[Fraction, Fraction]:
        return self.state.v

    @property
    def n_steps(self) -> int:
        return self.state.n

    @property
    def error_bound(self) -> Fraction:
        """Bound on |v_N - v_limit| from the drift property."""
        return Fraction(2, 2 ** self.n_steps)


def construct(
    targets: Sequence[TargetInterval],
    branch_bits: int = 0,
    n_max: Optional[int] = None,
    k_budget: Optional[int] = None,
    q_cap: Optional[int] = None,
    on_step: Optional[Callable[[ConstructionState], None]] = None,
) -> ConstructionResult:
    targets = list(targets)
    n_max = len(targets) if n_max is None else n_max
    if n_max > len(targets):
        raise ValueError(f"{n_max} steps requested but only {len(targets)} targets given")
    state = ConstructionState(targets)
    for n in range(1, n_max + 1):
        state = step(state, branch_bit(branch_bits, n), k_budget, q_cap)
        if on_step is not None:
            on_step(state)
    return ConstructionResult(state, branch_bits)


def result_from_points(points: Sequence[LatticePoint], targets: Sequence[TargetInterval], branch_bits: int = 0) -> ConstructionResult:
    """Rebuild a result from stored points, re-certifying every prefix."""
    points = [LatticePoint(*u) for u in points]
    certificates = []
    for n in range(1, len(points)):
        certificates.append(check_properties(points[: n + 1], targets))
    return ConstructionResult(ConstructionState(list(targets), points, certificates), branch_bits)


@dataclass(frozen=True)
class LimitReport:
    passed: bool
    depth: int
    mismatch_index: Optional[int]
    error_bound: Fraction
    drift: float
    detail: str = ""


def validate_limit(result: ConstructionResult, depth: int) -> LimitReport:
    """
    Check that the best approximations of v_N up to q_depth are exactly
    w_0 .. w_depth. Needs N >= depth + 2 and no stray lattice points on the
    final cylinders' lateral surfaces for nu <= depth.
    """
    N = result.n_steps
    if depth < 0 or N < depth + 2:
        raise MarginTooSmall(f"{N} steps cannot certify depth {depth}")
    final = result.state.certificates[-1] if result.state.certificates else None
    if final is None or not final.passed:
        raise MarginTooSmall("final state is not certified")
    for nu in range(1, depth + 1):
        if final.lateral_boundary.get(nu):
            raise MarginTooSmall(f"stray boundary points on cylinder {nu}: {final.lateral_boundary[nu]}")

    points = result.state.points
    v = result.v
    chain = best_approx_seq(TargetVector(lit(v[0]), lit(v[1])), points[depth].x)
    mismatch = None
    for index, u in enumerate(points[: depth + 1]):
        if index >= len(chain) or (chain[index].q, chain[index].p) != (u.x, (u.y, u.z)):
            mismatch = index
            break
    if mismatch is None and len(chain) != depth + 1:
        mismatch = depth + 1
    drift = math.sqrt(float(final.drift2)) if final.drift2 is not None else 0.0
    detail = "" if mismatch is None else f"chain differs at index {mismatch}"
    if mismatch is not None:
        logger.error("Limit validation failed: %s", detail)
    return LimitReport(mismatch is None, depth, mismatch, result.error_bound, drift, detail)


def branch_divergence(
    targets: Sequence[TargetInterval],
    n_max: int,
    bit: int,
    branch_bits: int = 0,
    k_budget: Optional[int] = None,
    base: Optional[ConstructionResult] = None,
) -> Dict[str, object]:
    """
    Run the construction with bit ``bit`` of ``branch_bits`` clear and set and
    report where the chains part. ``base`` is reused for the run that matches
    ``branch_bits``.
    """
    clear_bits = branch_bits & ~(1 << bit)
    set_bits = branch_bits | (1 << bit)
    runs = {}
    for bits in (clear_bits, set_bits):
        if base is not None and base.branch_bits == bits and base.n_steps == n_max:
            runs[bits] = base
        else:
            runs[bits] = construct(targets, bits, n_max, k_budget)
    cleared, flipped = runs[clear_bits], runs[set_bits]
    first_difference = next(
        (n for n, (u, w) in enumerate(zip(cleared.state.points, flipped.state.points)) if u != w),
        None,
    )
    distance2 = (cleared.v[0] - flipped.v[0]) ** 2 + (cleared.v[1] - flipped.v[1]) ** 2
    logger.info("Branch bit %s parts the chains at step %s", bit, first_difference, extra={"distinct": distance2 > 0})
    return {
        "bit": bit,
        "first_difference": first_difference,
        "distance2": distance2,
        "v_clear": cleared.v,
        "v_set": flipped.v,
    }
