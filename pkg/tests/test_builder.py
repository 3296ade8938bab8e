from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dspectrum.services import builder
from dspectrum.services.builder import (
    Chart,
    ChartContext,
    MarginTooSmall,
    ParamPoint,
    TargetInterval,
    b2_contains,
    branch_bit,
    check_properties,
    constant_targets,
    construct,
    cylinder_of,
    epsilon_search,
    family_r,
    inner_interval,
    reparam,
    result_from_points,
    shrinking_targets,
    validate_limit,
)
from dspectrum.services.approx2d import SearchExhausted
from dspectrum.services.exact import TWO_OVER_SQRT3, DomainViolation, to_float
from dspectrum.services.lattice3 import LatticePoint, build_frame


CTX = ChartContext.of(2, Fraction(1, 2))
A1_POINT = ParamPoint.of(Chart.A1, 4, 3, Fraction(1, 2))


def coords(p):
    return (p.x.exact_value(), p.y.exact_value(), p.z.exact_value())


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------


def test_reparam_from_a1():
    assert coords(reparam(A1_POINT, Chart.A2, CTX)) == (12, Fraction(37, 4), 0)
    assert coords(reparam(A1_POINT, Chart.A0, CTX)) == (2, Fraction(3, 2), Fraction(1, 4))


def test_reparam_back_to_a1():
    from_a2 = ParamPoint.of(Chart.A2, 12, Fraction(37, 4), 0)
    from_a0 = ParamPoint.of(Chart.A0, 2, Fraction(3, 2), Fraction(1, 4))
    assert coords(reparam(from_a2, Chart.A1, CTX)) == (4, 3, Fraction(1, 2))
    assert coords(reparam(from_a0, Chart.A1, CTX)) == (4, 3, Fraction(1, 2))
    assert coords(reparam(from_a0, Chart.A2, CTX)) == (12, Fraction(37, 4), 0)


def test_reparam_rejects_points_off_the_chart():
    with pytest.raises(DomainViolation):
        reparam(ParamPoint.of(Chart.A0, 3, 1, 1), Chart.A1, CTX)
    with pytest.raises(DomainViolation):
        reparam(ParamPoint.of(Chart.A1, 4, 3, 1), Chart.A2, CTX)
    with pytest.raises(DomainViolation):
        reparam(ParamPoint.of(Chart.A2, 4, 0, 0), Chart.A1, CTX)


def test_cylinder_is_the_same_in_every_chart():
    expected = (4, Fraction(37, 16), Fraction(37, 4))
    for chart in Chart:
        cylinder = cylinder_of(reparam(A1_POINT, chart, CTX), CTX)
        got = (
            cylinder.length.exact_value(),
            cylinder.radius2.exact_value(),
            cylinder.volume_over_pi.exact_value(),
        )
        assert got == expected


positive = st.fractions(min_value=Fraction(1, 50), max_value=50, max_denominator=50)


@settings(max_examples=60, deadline=None)
@given(q=st.integers(min_value=1, max_value=20), h=positive, x=positive, y=positive)
def test_chart_round_trip(q, h, x, y):
    ctx = ChartContext.of(q, h)
    start = ParamPoint.of(Chart.A1, x, y, h)
    a2 = reparam(start, Chart.A2, ctx)
    a0 = reparam(a2, Chart.A0, ctx)
    back = reparam(a0, Chart.A1, ctx)
    assert coords(back) == coords(start)


def test_family_volume_is_constant():
    family = family_r(Fraction(1, 2), CTX)
    assert family.volume_over_pi.exact_value() == 1
    for x in (1, 3, 7):
        member = ParamPoint.of(Chart.A2, x, 1, 0)
        for chart in Chart:
            assert family.contains(reparam(member, chart, CTX))
        assert cylinder_of(member, CTX).volume_over_pi.exact_value() == 1
    assert not family.contains(ParamPoint.of(Chart.A2, 3, 2, 0))


def test_family_rejects_non_positive_r():
    with pytest.raises(DomainViolation):
        family_r(0, CTX)


# ---------------------------------------------------------------------------
# B2 and epsilon
# ---------------------------------------------------------------------------

SQUARE = ChartContext.of(1, 1, a=1)


def test_b2_small_and_large_cylinders():
    assert b2_contains(ParamPoint.of(Chart.A2, Fraction(1, 2), Fraction(1, 100), 0), SQUARE)
    assert not b2_contains(ParamPoint.of(Chart.A2, Fraction(1, 2), 10, 0), SQUARE)


def test_b2_boundary_at_critical_scale():
    def scaled(factor):
        t = TWO_OVER_SQRT3 * factor
        return ParamPoint.of(Chart.A2, t * Fraction(3, 2), t, 0)

    assert b2_contains(scaled(Fraction(999, 1000)), SQUARE)
    assert not b2_contains(scaled(Fraction(1001, 1000)), SQUARE)


def test_b2_closed_under_shrinking():
    p = ParamPoint.of(Chart.A2, Fraction(5, 8), Fraction(1, 2), 0)
    assert b2_contains(p, SQUARE)
    assert b2_contains(ParamPoint.of(Chart.A2, Fraction(5, 16), Fraction(1, 4), 0), SQUARE)


def test_b2_needs_an_a2_point_and_a_shift():
    with pytest.raises(DomainViolation):
        b2_contains(A1_POINT, SQUARE)
    with pytest.raises(DomainViolation):
        b2_contains(ParamPoint.of(Chart.A2, 1, 1, 0), ChartContext.of(1, 1))


def test_epsilon_search_on_origin_frame():
    ctx = ChartContext.from_frame(build_frame(LatticePoint(1, 0, 0)))
    eps = epsilon_search(ctx, Fraction(1, 2))
    assert eps == Fraction(1, 4)
    for sign in (-1, 1):
        x2 = Fraction(1, 2) * (Fraction(3, 2) + sign * eps)
        assert b2_contains(ParamPoint.of(Chart.A2, x2, Fraction(1, 2), 0), ctx)


def test_epsilon_search_rejects_lambda_out_of_range():
    with pytest.raises(DomainViolation):
        epsilon_search(SQUARE, TWO_OVER_SQRT3)
    with pytest.raises(DomainViolation):
        epsilon_search(SQUARE, 0)


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------


def test_target_interval_validation():
    with pytest.raises(DomainViolation):
        TargetInterval(Fraction(1), Fraction(2))
    with pytest.raises(DomainViolation):
        TargetInterval(Fraction(-1, 10), Fraction(1, 2))
    with pytest.raises(DomainViolation):
        TargetInterval(Fraction(1, 2), Fraction(1, 2))


def test_inner_interval_clips_to_the_domain():
    assert inner_interval(1, Fraction(1, 20)) == TargetInterval(Fraction(19, 20), Fraction(21, 20))
    assert inner_interval(0, Fraction(1, 100)) == TargetInterval(Fraction(0), Fraction(1, 100))

    near_top = inner_interval(TWO_OVER_SQRT3 - Fraction(1, 20), Fraction(1, 10))
    assert near_top.hi is None
    assert to_float(TWO_OVER_SQRT3) - 0.1501 < float(near_top.lo) < to_float(TWO_OVER_SQRT3) - 0.149


def test_shrinking_targets():
    targets = shrinking_targets(1, 3)
    assert [t.lo for t in targets] == [0, Fraction(1, 2), Fraction(2, 3)]
    assert all(t.hi is None for t in targets)


def test_target_interval_dict_round_trip():
    for target in (TargetInterval(Fraction(9, 10), Fraction(11, 10)), TargetInterval(Fraction(1, 3))):
        assert TargetInterval.from_dict(target.as_dict()) == target
    assert TargetInterval(Fraction(1, 3)).as_dict() == {"lo": "1/3", "hi": "2/sqrt(3)"}


def test_contains_interior_is_open():
    target = TargetInterval(Fraction(9, 10), Fraction(11, 10))
    assert target.contains_interior(Fraction(1))
    assert not target.contains_interior(Fraction(9, 10))
    assert not target.contains_interior(Fraction(11, 10))
    assert TargetInterval(Fraction(1)).contains_interior(Fraction(115, 100))
    assert not TargetInterval(Fraction(1)).contains_interior(Fraction(116, 100))


# ---------------------------------------------------------------------------
# Chain properties
# ---------------------------------------------------------------------------


def test_check_properties_initial_state():
    cert = check_properties([LatticePoint(1, 0, 0)], [])
    assert cert.passed
    assert all(cert.properties[k] for k in range(1, 7))


def test_check_properties_needs_increasing_denominators():
    targets = constant_targets(1, Fraction(1, 10), 2)
    cert = check_properties([LatticePoint(1, 0, 0), LatticePoint(1, 1, 0)], targets)
    assert cert.failed_property == 2
    cert = check_properties([LatticePoint(2, 0, 0), LatticePoint(3, 1, 0)], targets)
    assert cert.failed_property == 2


def test_check_properties_volume_outside_target():
    # v = (1/2, 0): V/pi = 2 * 1/4 = 1/2
    cert = check_properties([LatticePoint(1, 0, 0), LatticePoint(2, 1, 0)], [TargetInterval(Fraction(9, 10), Fraction(11, 10))])
    assert cert.volumes == [Fraction(1, 2)]
    assert cert.failed_property == 4
    assert builder.PROPERTY_NAMES[4] == "volume in target"


def test_branch_bit():
    assert [branch_bit(0b101, n) for n in range(1, 5)] == [1, 0, 1, 0]
    assert branch_bit(0, 7) == 0


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

TARGETS = constant_targets(1, Fraction(1, 10), 2)


@pytest.fixture(scope="module")
def two_steps():
    return construct(TARGETS)


def test_single_step_lands_in_target():
    result = construct(TARGETS[:1])
    cert = result.state.certificates[-1]
    assert cert.passed
    assert Fraction(9, 10) < cert.volumes[0] < Fraction(11, 10)
    assert result.state.points[1].x > 1


def test_construction_is_certified(two_steps):
    state = two_steps.state
    assert state.n == 2
    assert all(cert.passed for cert in state.certificates)
    assert [u.x for u in state.points] == sorted({u.x for u in state.points})
    for volume in state.certificates[-1].volumes:
        assert TARGETS[0].contains_interior(volume)
    assert two_steps.error_bound == Fraction(1, 2)


def test_construction_is_deterministic(two_steps):
    seen = []
    again = construct(TARGETS, on_step=seen.append)
    assert again.state.points == two_steps.state.points
    assert [state.n for state in seen] == [1, 2]


def test_result_from_points_recertifies(two_steps):
    rebuilt = result_from_points(two_steps.state.points, TARGETS, two_steps.branch_bits)
    assert rebuilt.v == two_steps.v
    fresh = rebuilt.state.certificates[-1]
    stored = two_steps.state.certificates[-1]
    assert fresh.passed
    assert fresh.radii2 == stored.radii2
    assert fresh.volumes == stored.volumes


def test_validate_limit(two_steps):
    report = validate_limit(two_steps, 0)
    assert report.passed
    assert report.mismatch_index is None
    with pytest.raises(MarginTooSmall):
        validate_limit(two_steps, 1)
    with pytest.raises(MarginTooSmall):
        validate_limit(two_steps, -1)


def test_construct_rejects_too_many_steps():
    with pytest.raises(ValueError):
        construct(TARGETS, n_max=3)


def test_branch_divergence_on_first_step():
    report = builder.branch_divergence(TARGETS[:1], 1, 0)
    assert report["first_difference"] == 1
    assert report["distance2"] > 0


def test_admissible_k_search_first_strip_point():
    frame = build_frame(LatticePoint(1, 0, 0))

    def accept(u):
        return builder.StepCertificate(1)

    found = builder.admissible_k_search(frame, Fraction(1, 2), Fraction(1, 4), 0, accept, 5)
    assert found.k == 1
    assert found.u == LatticePoint(4, -1, 1)
    assert frame.normal.dot(found.u) == 1

    with pytest.raises(SearchExhausted):
        builder.admissible_k_search(frame, Fraction(1, 2), Fraction(1, 4), 0, accept, 1)
    with pytest.raises(SearchExhausted):
        builder.admissible_k_search(frame, Fraction(1, 2), Fraction(1, 4), 0, accept, 5, x_cap=3)


def test_step_extends_the_chain():
    state = builder.step(builder.ConstructionState(list(TARGETS)), 0)
    assert state.n == 1
    cert = state.certificates[0]
    assert cert.passed
    assert cert.branch == 0
    assert cert.side == 1
    assert cert.b2 is True
    assert cert.k is not None and cert.epsilon > 0
    assert cert.k >= cert.k_guaranteed
    frame = build_frame(LatticePoint(1, 0, 0))
    assert b2_contains(builder.a2_point(frame, state.points[1]), ChartContext.from_frame(frame))
    with pytest.raises(ValueError):
        builder.step(builder.ConstructionState(TARGETS[:1], state.points, state.certificates), 0)


def test_strip_bounds():
    ctx = ChartContext.from_frame(build_frame(LatticePoint(1, 0, 0)))
    (x_lo, x_hi), (y_lo, y_hi) = builder.strip_bounds(ctx, Fraction(1, 2), Fraction(1, 4), 1)
    assert (x_lo.exact_value(), x_hi.exact_value()) == (1, Fraction(5, 4))
    assert (y_lo.exact_value(), y_hi.exact_value()) == (Fraction(5, 12), Fraction(1, 2))


def test_step_frame_faces_the_previous_point():
    points = [LatticePoint(1, 0, 0), LatticePoint(68, -8, 1)]
    plain = build_frame(points[-1])
    assert plain.y_index(points[0]) == -65

    frame = builder.step_frame(points, 0)
    assert frame.side == -1
    assert frame.normal == plain.normal
    assert frame.y_index(points[0]) == 65
    assert builder.step_frame(points[:1], 0).side == 1


def test_step_frame_keeps_side_when_previous_point_is_above():
    points = [LatticePoint(1, 0, 0), LatticePoint(68, -8, 1)]
    frame = builder.step_frame(points, 0)
    ahead = frame.point(3, 2, 1)
    follow = builder.step_frame(points + [ahead], 1)
    assert follow.y_index(points[-1]) >= 0


def test_a2_point_volume_matches_the_candidate():
    frame = build_frame(LatticePoint(1, 0, 0))
    u = LatticePoint(4, -1, 1)
    p = builder.a2_point(frame, u)
    Y = frame.y_index(u)
    assert p.chart is Chart.A2
    assert p.x.exact_value() == Y
    volume = cylinder_of(p, ChartContext.from_frame(frame)).volume_over_pi
    assert to_float(volume) == pytest.approx((Y * Y + frame.q ** 2) / (frame.norm2 * u.x))


def test_gap_k_min_grows_with_shrinking_epsilon():
    frame = build_frame(LatticePoint(1, 0, 0))
    ks = [builder.gap_k_min(frame, Fraction(1, 2), Fraction(1, 2 ** m)) for m in range(2, 8)]
    assert ks == sorted(ks)
    assert ks[-1] > ks[0]


def test_gap_guaranteed_strip_holds_a_point_per_line():
    frame = build_frame(LatticePoint(1, 0, 0))
    lam, eps = Fraction(1, 2), Fraction(1, 4)
    k = builder.gap_k_min(frame, lam, eps)
    # strips alternate between holding one plane line and none
    found = builder.admissible_k_search(frame, lam, eps, k, lambda u: builder.StepCertificate(1), 2)
    assert found.k in (k, k + 1)
    assert frame.normal.dot(found.u) == 1


@pytest.mark.parametrize("lam", [Fraction(1, 10), Fraction(1, 2), Fraction(1)])
def test_strip_gap_grows_without_bound(lam):
    frame = build_frame(LatticePoint(1, 0, 0))
    eps = Fraction(1, 8)
    gaps = [builder.strip_gap(frame, lam, eps, k) for k in range(1001)]
    first = next(k for k in range(1001) if lam * (frame.a + Fraction(2 * k + 1, 2) * frame.q) >= frame.q)
    assert all(a < b for a, b in zip(gaps[first:], gaps[first + 1 :]))
    assert gaps[-1] > 10 * gaps[first]
    k = builder.gap_k_min(frame, lam, eps)
    assert gaps[k] > 2 * frame.q
