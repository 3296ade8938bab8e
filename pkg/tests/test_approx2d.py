import math
import random
from fractions import Fraction

import pytest

from dspectrum.services import approx2d
from dspectrum.services.approx2d import (
    BestApproxRecord,
    TargetVector,
    best_approx_seq,
    cylinder_int_empty,
    enumerate_disk,
    projected_basis,
    psi2,
    spectrum_bounds_check,
    validate_best_approx,
)
from dspectrum.services.exact import DomainViolation, lit, sqrt, to_float
from dspectrum.services.lattice3 import LatticePoint


ENGINES = ("scan", "disk", "ellipsoid")


def rational_vector(a, b):
    return TargetVector.of(Fraction(a), Fraction(b))


def naive_witness(v, Q, R2):
    """Smallest interior lattice point (x, p1, p2) by brute force."""
    a, b = v.rational
    reach = math.isqrt(math.ceil(R2)) + 1
    for x in range(1, math.ceil(Q)):
        if x >= Q:
            break
        for p1 in range(math.floor(x * a) - reach, math.ceil(x * a) + reach + 1):
            for p2 in range(math.floor(x * b) - reach, math.ceil(x * b) + reach + 1):
                if (x * a - p1) ** 2 + (x * b - p2) ** 2 < R2:
                    return LatticePoint(x, p1, p2)
    return None


def naive_chain(v, q_max):
    """(q, p) of every strict improvement of min_p |q v - p| for q = 1 .. q_max."""
    a, b = v.rational
    chain = []
    best = None
    for q in range(1, q_max + 1):
        candidates = []
        for c in (a, b):
            low, high = math.floor(q * c), math.ceil(q * c)
            dl, dh = (q * c - low) ** 2, (q * c - high) ** 2
            candidates.append((low, dl) if dl <= dh else (high, dh))
        dist2 = candidates[0][1] + candidates[1][1]
        if best is None or dist2 < best:
            best = dist2
            chain.append((q, (candidates[0][0], candidates[1][0])))
            if dist2 == 0:
                break
    return chain


def test_target_vector_common_form():
    v = rational_vector(Fraction(1, 2), Fraction(1, 3))
    assert v.common_form() == (3, 2, 6)
    with pytest.raises(DomainViolation):
        TargetVector.of(sqrt(2), 1).common_form()


def test_cylinder_example_both_engines():
    v = rational_vector(Fraction(1, 2), Fraction(1, 3))
    for engine in ENGINES:
        report = cylinder_int_empty(v, 6, Fraction(1, 4), engine)
        assert not report.empty
        assert report.witness == LatticePoint(2, 1, 1)


def test_cylinder_lateral_boundary_is_not_interior():
    v = rational_vector(Fraction(1, 2), 0)
    for engine in ENGINES:
        report = cylinder_int_empty(v, 2, Fraction(1, 4), engine)
        assert report.empty
        assert report.lateral_boundary(2) == [LatticePoint(1, 0, 0), LatticePoint(1, 1, 0)]
        assert LatticePoint(2, 1, 0) in report.boundary


def test_cylinder_rejects_bad_shape():
    with pytest.raises(DomainViolation):
        cylinder_int_empty(rational_vector(0, 0), 0, 1)


def test_cylinder_engines_agree_with_brute_force():
    rng = random.Random(2024)
    for _ in range(200):
        D = rng.randint(1, 30)
        v = rational_vector(Fraction(rng.randint(0, D - 1), D), Fraction(rng.randint(0, D - 1), D))
        Q = Fraction(rng.randint(1, 200), rng.randint(1, 4))
        R2 = Fraction(rng.randint(0, 400), 400)
        expected = naive_witness(v, Q, R2)
        for engine in ENGINES:
            report = cylinder_int_empty(v, Q, R2, engine)
            assert report.empty == (expected is None), (v, Q, R2, engine)
            assert report.witness == expected, (v, Q, R2, engine)


def test_auto_engine_picks_ellipsoid_for_long_cylinders():
    D = 10**12 + 39
    v = rational_vector(Fraction(10**11 + 3, D), Fraction(7 * 10**11 + 1, D))
    report = cylinder_int_empty(v, 10**9, Fraction(1, 10**8))
    assert report.engine == "ellipsoid"
    by_disk = cylinder_int_empty(v, 10**9, Fraction(1, 10**8), "disk")
    assert (report.empty, report.witness) == (by_disk.empty, by_disk.witness)
    small = cylinder_int_empty(v, 50, Fraction(1, 100))
    assert small.engine == "scan"
    assert small.empty == (naive_witness(v, 50, Fraction(1, 100)) is None)


def test_ellipsoid_engine_needs_rational_data():
    with pytest.raises(DomainViolation):
        cylinder_int_empty(TargetVector.of(sqrt(2), sqrt(3)), 3, Fraction(1, 5), "ellipsoid")


def test_irrational_cylinder_scan():
    v = TargetVector.of(sqrt(2), sqrt(3))
    assert cylinder_int_empty(v, 3, Fraction(1, 5)).empty
    report = cylinder_int_empty(v, 4, Fraction(1, 5))
    assert report.witness == LatticePoint(3, 4, 5)


def test_disk_enumeration_matches_lattice_definition():
    P1, P2, D = 5, 7, 13
    bound = 60
    found = sorted((m1, m2) for m1, m2, _, _ in enumerate_disk(projected_basis(P1, P2, D), bound))
    expected = set()
    for x in range(D):
        for p1 in range(-20, 21):
            for p2 in range(-20, 21):
                m = (x * P1 - D * p1, x * P2 - D * p2)
                if m[0] ** 2 + m[1] ** 2 <= bound:
                    expected.add(m)
    assert found == sorted(expected)
    for m1, m2, s, x in enumerate_disk(projected_basis(P1, P2, D), bound):
        assert s == m1 * m1 + m2 * m2
        assert (x * P1 - m1) % D == 0 and (x * P2 - m2) % D == 0


def test_best_approximations_sqrt2_sqrt3():
    chain = best_approx_seq(TargetVector.of(sqrt(2), sqrt(3)), 10)
    assert [r.q for r in chain] == [1, 3, 7]
    assert [r.p for r in chain] == [(1, 2), (4, 5), (10, 12)]
    assert chain[-1].v_over_pi is None


def test_rational_chain_is_degenerate():
    chain = best_approx_seq(rational_vector(Fraction(1, 2), Fraction(1, 3)), 10)
    assert [r.q for r in chain] == [1, 2, 6]
    assert chain[-1].degenerate
    assert chain[0].ambiguous
    assert chain[0].as_dict() == {
        "n": 0,
        "q": "1",
        "p": ["0", "0"],
        "R2": "13/36",
        "V_over_pi": "13/18",
        "ambiguous": True,
        "degenerate": False,
    }


def test_rational_chain_matches_full_rescan():
    rng = random.Random(11)
    for _ in range(20):
        D = rng.randint(2, 5000)
        v = rational_vector(Fraction(rng.randint(1, D - 1), D), Fraction(rng.randint(1, D - 1), D))
        chain = best_approx_seq(v, 2000)
        assert [(r.q, r.p) for r in chain] == naive_chain(v, 2000), v


def test_rational_chain_by_ellipsoid_matches_full_rescan(monkeypatch):
    monkeypatch.setattr(approx2d, "ELLIPSOID_COST", 0)
    rng = random.Random(5)
    for _ in range(20):
        D = rng.randint(2, 5000)
        v = rational_vector(Fraction(rng.randint(1, D - 1), D), Fraction(rng.randint(1, D - 1), D))
        chain = best_approx_seq(v, 2000)
        assert [(r.q, r.p) for r in chain] == naive_chain(v, 2000), v


def test_irrational_chain_matches_float_rescan():
    v = TargetVector.of(sqrt(2), sqrt(3))
    chain = best_approx_seq(v, 300)
    best, expected = None, []
    for q in range(1, 301):
        d = math.hypot(q * math.sqrt(2) - round(q * math.sqrt(2)), q * math.sqrt(3) - round(q * math.sqrt(3)))
        if best is None or d < best:
            best = d
            expected.append(q)
    assert [r.q for r in chain] == expected


def test_psi2_values():
    value = psi2(TargetVector.of(sqrt(2), sqrt(3)), 6)
    assert value.q == 3
    assert abs(to_float(value.value) - 0.3123) < 1e-3
    half = psi2(rational_vector(Fraction(1, 2), Fraction(1, 2)), 10)
    assert half.value.exact_value() == 0
    assert half.degenerate


def test_psi2_accepts_float_bound():
    v = TargetVector.of(sqrt(2), sqrt(3))
    value, expected = psi2(v, 6.5), psi2(v, 6)
    assert (value.q, value.p) == (expected.q, expected.p)
    assert to_float(value.value) == to_float(expected.value)
    assert psi2(v, 7.0).q == 7


def test_validate_best_approx_accepts_true_chain():
    v = rational_vector(Fraction(5, 13), Fraction(7, 11))
    chain = best_approx_seq(v, 100)
    assert validate_best_approx(chain, v).passed


def test_validate_best_approx_reports_first_failure():
    v = rational_vector(Fraction(5, 13), Fraction(7, 11))
    chain = best_approx_seq(v, 100)
    assert len(chain) >= 3

    shifted = [BestApproxRecord(0, 2, chain[0].p, chain[0].r2)] + list(chain[1:])
    assert validate_best_approx(shifted, v).failed_condition == 1

    swapped = [chain[0], chain[2], chain[1]] + list(chain[3:])
    assert validate_best_approx(swapped, v).failed_condition == 3

    skipped = [chain[0]] + list(chain[2:])
    result = validate_best_approx(skipped, v)
    assert not result.passed
    assert result.failed_condition == 2
    assert result.index == 1


def test_spectrum_bounds():
    report = spectrum_bounds_check(TargetVector.of(sqrt(2), sqrt(3)), 1000)
    assert report.below_minkowski
    assert to_float(report.max_product) <= 1.154701
    assert not report.degenerate


def test_spectrum_bounds_rational_products_are_exact():
    report = spectrum_bounds_check(rational_vector(Fraction(1, 2), Fraction(1, 3)), 10)
    assert [p.exact_value() for p in report.products] == [Fraction(13, 18), Fraction(2, 3)]
    assert report.degenerate
