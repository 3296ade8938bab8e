"""
Integer lattice geometry in Z^3: rational planes through a primitive point,
basis completion, and the normalising frame that maps the plane to z = 0.

The frame's y-coordinate of any lattice point is an integer multiple of h/q,
so points are carried exactly as (x, Y, level) with y~ = Y*h/q and z~ = level*h.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, NamedTuple, Optional, Tuple

from .exact import DSpectrumError, RealExpr, lit, sqrt


logger = logging.getLogger(__name__)


class LatticeError(DSpectrumError, ValueError):
    pass


class LatticePoint(NamedTuple):
    x: int
    y: int
    z: int

    def __add__(self, other: "LatticePoint") -> "LatticePoint":  # type: ignore[override]
        return LatticePoint(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "LatticePoint":
        return LatticePoint(-self.x, -self.y, -self.z)

    def scale(self, k: int) -> "LatticePoint":
        return LatticePoint(k * self.x, k * self.y, k * self.z)

    def dot(self, other) -> int:
        return self.x * other[0] + self.y * other[1] + self.z * other[2]

    @property
    def is_primitive(self) -> bool:
        return math.gcd(self.x, self.y, self.z) == 1

    def __str__(self) -> str:
        return f"({self.x}, {self.y}, {self.z})"


ORIGIN_STEP = LatticePoint(1, 0, 0)


def ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    """Return (g, s, t) with s*a + t*b = g = gcd(a, b) >= 0."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_s, s = s, old_s - quotient * s
        old_t, t = t, old_t - quotient * t
    if old_r < 0:
        return -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def det3(a, b, c) -> int:
    return (
        a[0] * (b[1] * c[2] - b[2] * c[1])
        - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
    )


def kernel_basis(vector: LatticePoint) -> Tuple[LatticePoint, LatticePoint]:
    """A basis of {u in Z^3 : u . vector = 0} for a primitive ``vector``."""
    a1, a2, a3 = vector
    if not LatticePoint(a1, a2, a3).is_primitive:
        raise LatticeError(f"{vector} is not primitive")
    if a2 == 0 and a3 == 0:
        return LatticePoint(0, 1, 0), LatticePoint(0, 0, 1)
    g1, s, t = ext_gcd(a2, a3)
    k1 = LatticePoint(0, a3 // g1, -a2 // g1)
    k2 = LatticePoint(g1, -a1 * s, -a1 * t)
    return k1, k2


@dataclass(frozen=True)
class RationalPlane:
    normal: LatticePoint
    level: int = 0

    def contains(self, u) -> bool:
        return self.normal.dot(u) == self.level

    @property
    def projected_norm2(self) -> int:
        return self.normal.y ** 2 + self.normal.z ** 2


def _q(u: LatticePoint) -> int:
    return u.y * u.y + u.z * u.z


def _b(u: LatticePoint, v: LatticePoint) -> int:
    return u.y * v.y + u.z * v.z


def _sign_normalised(n: LatticePoint) -> LatticePoint:
    lead = n.y if n.y != 0 else n.z
    return -n if lead < 0 else n


def _gauss_reduce(b1: LatticePoint, b2: LatticePoint) -> Tuple[LatticePoint, LatticePoint]:
    """Lagrange-Gauss reduction under the form n_y^2 + n_z^2."""
    while True:
        if _q(b1) > _q(b2):
            b1, b2 = b2, b1
        mu = math.floor(Fraction(_b(b1, b2), _q(b1)) + Fraction(1, 2))
        if mu == 0:
            return b1, b2
        b2 = b2 - b1.scale(mu)


def plane_through(w: LatticePoint, seed: Optional[int] = None) -> RationalPlane:
    """
    Rational plane through 0 and primitive ``w`` whose normal has the
    shortest (y, z)-projection, i.e. the largest spacing h between the plane
    and its neighbours. Ties go to the lexicographically smallest
    sign-normalised normal; a ``seed`` picks among near-shortest normals instead.
    """
    w = LatticePoint(*w)
    if not w.is_primitive:
        raise LatticeError(f"{w} is not primitive")
    if w.x < 1:
        raise LatticeError(f"{w} must have positive x-coordinate")
    k1, k2 = kernel_basis(w)
    b1, b2 = _gauss_reduce(k1, k2)
    candidates = {_sign_normalised(c) for c in (b1, b2, b1 + b2, b1 - b2) if _q(c) > 0}
    shortest = min(_q(c) for c in candidates)
    if seed is None:
        normal = min(c for c in candidates if _q(c) == shortest)
    else:
        pool = sorted(c for c in candidates if _q(c) <= 2 * shortest)
        normal = random.Random(seed).choice(pool)
    logger.debug("Plane through %s has normal %s", w, normal)
    return RationalPlane(normal, 0)


def neighbor_planes(plane: RationalPlane) -> Tuple[LatticePoint, LatticePoint]:
    """Representatives w0+ and w0- = -w0+ of the planes n.u = +1 and n.u = -1."""
    nx, ny, nz = plane.normal
    g12, a, b = ext_gcd(nx, ny)
    g, c, e = ext_gcd(g12, nz)
    if g != 1:
        raise LatticeError(f"normal {plane.normal} is not primitive")
    plus = LatticePoint(c * a, c * b, e)
    return plus, -plus


@dataclass(frozen=True)
class FramePoint:
    """Exact frame coordinates: x~ = x, y~ = Y*h/q, z~ = level*h."""

    x: int
    Y: int
    level: int


@dataclass(frozen=True)
class Frame:
    """
    Normalising frame for the plane through w. ``normal`` is oriented so that
    ``w0p`` sits on level +1. ``norm2`` = n_y^2 + n_z^2, h^2 = 1/norm2,
    d^2 = norm2/q^2, and (w, g2, w0p) is a basis of Z^3. ``side`` = -1
    mirrors the in-plane y~ axis; g2 then points to the other half-plane.
    """

    w: LatticePoint
    normal: LatticePoint
    g2: LatticePoint
    w0p: LatticePoint
    branch: int
    side: int = 1

    @property
    def q(self) -> int:
        return self.w.x

    @property
    def a(self) -> int:
        return self.g2.x

    @property
    def norm2(self) -> int:
        return self.normal.y ** 2 + self.normal.z ** 2

    @property
    def h2(self) -> Fraction:
        return Fraction(1, self.norm2)

    @property
    def d2(self) -> Fraction:
        return Fraction(self.norm2, self.q ** 2)

    @property
    def h(self) -> RealExpr:
        return sqrt(self.h2)

    @property
    def d(self) -> RealExpr:
        return sqrt(self.d2)

    @property
    def b_index(self) -> int:
        """Y-coordinate of w0p; b = b_index*h/q with 0 <= b < d."""
        return self.y_index(self.w0p)

    @property
    def b(self) -> RealExpr:
        return self.b_index * self.h / self.q

    def y_index(self, u) -> int:
        """Integer Y with y~(u) = Y*h/q."""
        w = self.w
        ny, nz = self.normal.y, self.normal.z
        py = self.q * u[1] - u[0] * w.y
        pz = self.q * u[2] - u[0] * w.z
        return self.side * (-nz * py + ny * pz)

    def frame_point(self, u) -> FramePoint:
        return FramePoint(u[0], self.y_index(u), self.normal.dot(u))

    def decompose(self, u) -> Tuple[int, int, int]:
        """Integers (alpha, beta, gamma) with u = alpha*w + beta*g2 + gamma*w0p."""
        basis = (self.w, self.g2, self.w0p)
        det = det3(*basis)
        coefficients = []
        for i in range(3):
            columns = list(basis)
            columns[i] = LatticePoint(*u)
            num = det3(*columns)
            if num % det:
                raise LatticeError(f"{u} is not an integer combination of the frame basis")
            coefficients.append(num // det)
        return tuple(coefficients)

    def point(self, alpha: int, beta: int, gamma: int) -> LatticePoint:
        return self.w.scale(alpha) + self.g2.scale(beta) + self.w0p.scale(gamma)

    def as_dict(self) -> dict:
        return {
            "w": list(self.w),
            "normal": list(self.normal),
            "g2": list(self.g2),
            "w0p": list(self.w0p),
            "branch": self.branch,
            "side": self.side,
            "q": self.q,
            "a": self.a,
            "h2": f"{self.h2.numerator}/{self.h2.denominator}",
            "d2": f"{self.d2.numerator}/{self.d2.denominator}",
            "b_index": self.b_index,
        }


def build_frame(w, branch: int = 0, seed: Optional[int] = None, side: int = 1) -> Frame:
    if side not in (1, -1):
        raise LatticeError(f"side must be +1 or -1, got {side}")
    w = LatticePoint(*w)
    plane = plane_through(w, seed)
    normal = plane.normal if branch == 0 else -plane.normal
    k1, k2 = kernel_basis(normal)

    # Coordinates of w in the (k1, k2) basis of the plane lattice
    det_xy = k1.x * k2.y - k1.y * k2.x
    det_xz = k1.x * k2.z - k1.z * k2.x
    det_yz = k1.y * k2.z - k1.z * k2.y
    if det_xy:
        c1 = Fraction(w.x * k2.y - w.y * k2.x, det_xy)
        c2 = Fraction(k1.x * w.y - k1.y * w.x, det_xy)
    elif det_xz:
        c1 = Fraction(w.x * k2.z - w.z * k2.x, det_xz)
        c2 = Fraction(k1.x * w.z - k1.z * w.x, det_xz)
    else:
        c1 = Fraction(w.y * k2.z - w.z * k2.y, det_yz)
        c2 = Fraction(k1.y * w.z - k1.z * w.y, det_yz)
    if c1.denominator != 1 or c2.denominator != 1:
        raise LatticeError(f"{w} does not lie in the plane lattice of {normal}")
    _, s, t = ext_gcd(int(c1), int(c2))
    g2 = k1.scale(-t) + k2.scale(s)

    frame = Frame(w, normal, g2, neighbor_planes(RationalPlane(normal))[0], branch, side)
    if frame.y_index(g2) < 0:
        g2 = -g2
    if frame.y_index(g2) != frame.norm2:
        raise LatticeError(f"basis completion for {w} failed")

    # a in (0, q]
    shift = -((g2.x - 1) // frame.q)
    g2 = g2 + w.scale(shift)

    # 0 <= b < d, then 0 <= x(w0p) < q
    w0p = frame.w0p
    w0p = w0p - g2.scale(frame.y_index(w0p) // frame.norm2)
    w0p = w0p - w.scale(w0p.x // frame.q)

    result = Frame(w, normal, g2, w0p, branch, side)
    if abs(det3(result.w, result.g2, result.w0p)) != 1:
        raise LatticeError(f"frame for {w} is not unimodular")
    return result


def tilde_coords(frame: Frame, u) -> Tuple[RealExpr, RealExpr, RealExpr]:
    """Frame coordinates (u_x, beta*d + gamma*b, gamma*h) of u."""
    _, beta, gamma = frame.decompose(u)
    return lit(u[0]), beta * frame.d + gamma * frame.b, gamma * frame.h



# ---------------------------------------------------------------------------
# Reduction and enumeration under a positive definite rational form
# ---------------------------------------------------------------------------

UNIT_BASIS = (LatticePoint(1, 0, 0), LatticePoint(0, 1, 0), LatticePoint(0, 0, 1))
LLL_DELTA = Fraction(3, 4)


def form_dot(form, a, b) -> Fraction:
    return sum(a[i] * form[i][j] * b[j] for i in range(3) for j in range(3) if form[i][j])


def gram_schmidt(basis, form) -> Tuple[List[List[Fraction]], List[Fraction]]:
    """Coefficients mu[i][j] (j < i) and squared lengths of the orthogonalised basis."""
    n = len(basis)
    gram = [[form_dot(form, basis[i], basis[j]) for j in range(n)] for i in range(n)]
    mu = [[Fraction(0)] * n for _ in range(n)]
    lengths = [Fraction(0)] * n
    for i in range(n):
        for j in range(i):
            mu[i][j] = (gram[i][j] - sum(mu[j][k] * mu[i][k] * lengths[k] for k in range(j))) / lengths[j]
        lengths[i] = gram[i][i] - sum(mu[i][k] * mu[i][k] * lengths[k] for k in range(i))
        if lengths[i] <= 0:
            raise LatticeError("quadratic form is not positive definite")
    return mu, lengths


def lll_reduce(basis, form, delta: Fraction = LLL_DELTA) -> List[LatticePoint]:
    """LLL-reduce an integer basis of Z^3 under ``form``, in exact arithmetic."""
    basis = [LatticePoint(*b) for b in basis]
    mu, lengths = gram_schmidt(basis, form)
    k = 1
    while k < len(basis):
        for j in range(k - 1, -1, -1):
            shift = math.floor(mu[k][j] + Fraction(1, 2))
            if shift:
                basis[k] = basis[k] - basis[j].scale(shift)
                mu, lengths = gram_schmidt(basis, form)
        if lengths[k] >= (delta - mu[k][k - 1] ** 2) * lengths[k - 1]:
            k += 1
        else:
            basis[k], basis[k - 1] = basis[k - 1], basis[k]
            mu, lengths = gram_schmidt(basis, form)
            k = max(k - 1, 1)
    return basis


def enumerate_ellipsoid(form, center, bound) -> Iterator[LatticePoint]:
    """
    Every integer point u with form(u - center) <= bound, by depth-first
    enumeration over an LLL-reduced basis. Ranges are widened by one step on
    each side and every partial sum is then checked exactly.
    """
    basis = lll_reduce(UNIT_BASIS, form)
    mu, lengths = gram_schmidt(basis, form)
    det = det3(*basis)
    c = []
    for i in range(3):
        columns = list(basis)
        columns[i] = center
        c.append(Fraction(det3(*columns)) / det)
    y = [0, 0, 0]

    def descend(level: int, rest: Fraction) -> Iterator[LatticePoint]:
        middle = c[level] - sum(mu[i][level] * (y[i] - c[i]) for i in range(level + 1, 3))
        reach = math.isqrt(math.floor(rest / lengths[level])) + 1
        for value in range(math.floor(middle) - reach, math.ceil(middle) + reach + 1):
            term = lengths[level] * (value - middle) ** 2
            if term > rest:
                continue
            y[level] = value
            if level == 0:
                yield basis[0].scale(y[0]) + basis[1].scale(y[1]) + basis[2].scale(y[2])
            else:
                yield from descend(level - 1, rest - term)

    yield from descend(2, Fraction(bound))
