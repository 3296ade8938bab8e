import math
from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from dspectrum.services.exact import Outcome, certified_compare
from dspectrum.services.lattice3 import (
    LatticeError,
    LatticePoint,
    build_frame,
    det3,
    enumerate_ellipsoid,
    ext_gcd,
    form_dot,
    gram_schmidt,
    kernel_basis,
    lll_reduce,
    neighbor_planes,
    plane_through,
    tilde_coords,
)


primitive_points = st.tuples(
    st.integers(min_value=1, max_value=200),
    st.integers(min_value=-200, max_value=200),
    st.integers(min_value=-200, max_value=200),
).filter(lambda t: math.gcd(*t) == 1).map(lambda t: LatticePoint(*t))


def cross(a, b):
    return LatticePoint(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


@given(st.integers(min_value=-500, max_value=500), st.integers(min_value=-500, max_value=500))
def test_ext_gcd_bezout(a, b):
    g, s, t = ext_gcd(a, b)
    assert g == math.gcd(a, b)
    assert s * a + t * b == g


@given(primitive_points)
def test_kernel_basis_spans_the_orthogonal_lattice(w):
    k1, k2 = kernel_basis(w)
    assert k1.dot(w) == 0 and k2.dot(w) == 0
    assert cross(k1, k2) in (w, -w)


def test_kernel_basis_rejects_non_primitive():
    with pytest.raises(LatticeError):
        kernel_basis(LatticePoint(2, 4, 6))


def test_plane_through_origin_step():
    plane = plane_through(LatticePoint(1, 0, 0))
    assert plane.normal == LatticePoint(0, 0, 1)
    assert plane.projected_norm2 == 1


def test_plane_through_rejects_bad_points():
    with pytest.raises(LatticeError):
        plane_through(LatticePoint(2, 2, 0))
    with pytest.raises(LatticeError):
        plane_through(LatticePoint(0, 1, 0))


def test_plane_through_seed_is_deterministic():
    w = LatticePoint(7, 3, 5)
    assert plane_through(w, seed=3) == plane_through(w, seed=3)
    assert plane_through(w, seed=3).contains(w)


@given(primitive_points)
def test_neighbor_planes(w):
    plane = plane_through(w)
    plus, minus = neighbor_planes(plane)
    assert plane.normal.dot(plus) == 1
    assert minus == -plus


def test_frame_of_origin_step():
    frame = build_frame(LatticePoint(1, 0, 0))
    assert frame.normal == LatticePoint(0, 0, 1)
    assert frame.a == 1
    assert frame.b_index == 0
    assert frame.g2 == LatticePoint(1, -1, 0)
    assert frame.w0p == LatticePoint(0, 0, 1)


def test_frame_of_small_point():
    frame = build_frame(LatticePoint(2, 1, 1))
    assert frame.norm2 == 2
    assert frame.h2 == Fraction(1, 2)
    assert frame.d2 == Fraction(1, 2)
    assert abs(det3(frame.w, frame.g2, frame.w0p)) == 1


@given(primitive_points, st.integers(min_value=0, max_value=1))
def test_frame_invariants(w, branch):
    frame = build_frame(w, branch)
    q = frame.q
    assert frame.normal.dot(w) == 0
    assert frame.normal.dot(frame.g2) == 0
    assert frame.normal.dot(frame.w0p) == 1
    assert abs(det3(frame.w, frame.g2, frame.w0p)) == 1
    assert q * q * frame.h2 * frame.d2 == 1
    assert 0 < frame.a <= q
    assert 0 <= frame.b_index < frame.norm2
    assert 0 <= frame.w0p.x < q
    assert frame.y_index(frame.g2) == frame.norm2


def test_branches_use_opposite_planes():
    w = LatticePoint(5, 2, 3)
    zero, one = build_frame(w, 0), build_frame(w, 1)
    assert one.normal == -zero.normal
    assert zero.w0p != one.w0p


@given(
    primitive_points,
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
)
def test_decompose_inverts_point(w, x, y, z):
    frame = build_frame(w)
    u = LatticePoint(x, y, z)
    assert frame.point(*frame.decompose(u)) == u


def test_tilde_coords():
    frame = build_frame(LatticePoint(2, 1, 1))
    x, y, z = tilde_coords(frame, frame.w)
    assert x.exact_value() == 2
    assert y.exact_value() == 0 and z.exact_value() == 0
    _, _, z_plus = tilde_coords(frame, frame.w0p)
    assert certified_compare(z_plus, frame.h).outcome is Outcome.EQUAL


def test_frame_point_matches_tilde_y():
    frame = build_frame(LatticePoint(5, 2, 3))
    u = frame.point(2, 1, 1)
    point = frame.frame_point(u)
    _, y, _ = tilde_coords(frame, u)
    assert point.level == 1
    assert certified_compare(y, point.Y * frame.h / frame.q).outcome is Outcome.EQUAL


def test_frame_as_dict():
    assert build_frame(LatticePoint(1, 0, 0)).as_dict() == {
        "w": [1, 0, 0],
        "normal": [0, 0, 1],
        "g2": [1, -1, 0],
        "w0p": [0, 0, 1],
        "branch": 0,
        "side": 1,
        "q": 1,
        "a": 1,
        "h2": "1/1",
        "d2": "1/1",
        "b_index": 0,
    }


@given(primitive_points, st.integers(min_value=0, max_value=1))
def test_mirrored_frame(w, branch):
    frame = build_frame(w, branch)
    mirrored = build_frame(w, branch, side=-1)
    assert mirrored.normal == frame.normal
    assert mirrored.y_index(frame.g2) == -frame.norm2
    assert mirrored.y_index(mirrored.g2) == mirrored.norm2
    assert 0 < mirrored.a <= mirrored.q
    assert 0 <= mirrored.b_index < mirrored.norm2
    assert mirrored.normal.dot(mirrored.w0p) == 1
    assert abs(det3(mirrored.w, mirrored.g2, mirrored.w0p)) == 1


def test_mirrored_origin_frame():
    frame = build_frame(LatticePoint(1, 0, 0), side=-1)
    assert frame.g2 == LatticePoint(1, 1, 0)
    assert frame.y_index(LatticePoint(4, -1, 1)) == -1
    with pytest.raises(LatticeError):
        build_frame(LatticePoint(1, 0, 0), side=0)


IDENTITY = tuple(tuple(Fraction(int(i == j)) for j in range(3)) for i in range(3))
SKEWED = (
    (Fraction(5, 4), Fraction(1, 2), Fraction(0)),
    (Fraction(1, 2), Fraction(1), Fraction(1, 4)),
    (Fraction(0), Fraction(1, 4), Fraction(1, 2)),
)


@pytest.mark.parametrize("form", [IDENTITY, SKEWED])
def test_lll_reduce_is_size_reduced_and_lovasz(form):
    basis = lll_reduce([(1, 0, 0), (5, 1, 0), (7, 3, 1)], form)
    assert abs(det3(*basis)) == 1
    mu, lengths = gram_schmidt(basis, form)
    for i in range(3):
        for j in range(i):
            assert abs(mu[i][j]) <= Fraction(1, 2)
    for k in (1, 2):
        assert lengths[k] >= (Fraction(3, 4) - mu[k][k - 1] ** 2) * lengths[k - 1]


def test_gram_schmidt_rejects_indefinite_form():
    form = ((Fraction(1), 0, 0), (0, Fraction(-1), 0), (0, 0, Fraction(1)))
    with pytest.raises(LatticeError):
        gram_schmidt([(1, 0, 0), (0, 1, 0), (0, 0, 1)], form)


@pytest.mark.parametrize(
    "center, bound",
    [
        ((Fraction(0), Fraction(0), Fraction(0)), Fraction(1)),
        ((Fraction(1, 3), Fraction(-5, 2), Fraction(7, 4)), Fraction(3)),
        ((Fraction(10, 7), Fraction(2, 9), Fraction(-1, 5)), Fraction(5, 2)),
    ],
)
def test_enumerate_ellipsoid_matches_box_scan(center, bound):
    found = list(enumerate_ellipsoid(SKEWED, center, bound))
    assert len(found) == len(set(found))

    expected = set()
    base = [round(c) for c in center]
    for x in range(base[0] - 6, base[0] + 7):
        for y in range(base[1] - 6, base[1] + 7):
            for z in range(base[2] - 6, base[2] + 7):
                offset = (x - center[0], y - center[1], z - center[2])
                if form_dot(SKEWED, offset, offset) <= bound:
                    expected.add(LatticePoint(x, y, z))
    assert expected
    assert set(found) == expected
